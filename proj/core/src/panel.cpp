#include "covkit/panel.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include "covkit/errors.hpp"
#include "covkit/rng.hpp"

namespace covkit {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool looks_like_iso_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    }
    return true;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Howard Hinnant's civil-calendar conversions, for generating date columns.
long days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

void civil_from_days(long z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<int>(yoe) + static_cast<int>(era) * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : static_cast<unsigned>(-9));
    y += m <= 2;
}

} // namespace

std::ptrdiff_t ReturnsPanel::row_at_or_after(const std::string& iso_date) const {
    auto it = std::lower_bound(dates.begin(), dates.end(), iso_date);
    if (it == dates.end()) {
        throw DataError("no observation on or after date " + iso_date);
    }
    return it - dates.begin();
}

Matrix ReturnsPanel::slice(const IndexRange& range, const std::vector<int>& columns) const {
    Matrix out(range.length(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c) {
        out.col(static_cast<Eigen::Index>(c)) = values.col(columns[c]).segment(range.begin, range.length());
    }
    return out;
}

BoolMatrix ReturnsPanel::mask_slice(const IndexRange& range, const std::vector<int>& columns) const {
    BoolMatrix out(range.length(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c) {
        out.col(static_cast<Eigen::Index>(c)) = present.col(columns[c]).segment(range.begin, range.length());
    }
    return out;
}

ReturnsPanel parse_panel_csv(const std::string& content, const std::string& origin) {
    std::istringstream in(content);
    std::string line;
    if (!std::getline(in, line)) throw DataError(origin + ": empty input");

    auto header = split_csv_line(trim(line));
    if (header.empty() || trim(header[0]) != "date") {
        throw DataError(origin + ": first header column must be 'date'");
    }
    const std::size_t n = header.size() - 1;
    if (n == 0) throw DataError(origin + ": no asset columns");

    std::vector<std::string> assets(header.begin() + 1, header.end());
    for (auto& a : assets) a = trim(a);

    struct Row {
        std::string date;
        std::vector<double> vals;
        std::vector<bool> present;
    };
    std::vector<Row> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty()) continue;
        auto cells = split_csv_line(t);
        if (cells.size() != n + 1) {
            throw DataError(origin + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(n + 1) + " cells, got " + std::to_string(cells.size()));
        }
        Row row;
        row.date = trim(cells[0]);
        if (!looks_like_iso_date(row.date)) {
            throw DataError(origin + ":" + std::to_string(lineno) + ": malformed date '" +
                            row.date + "' (want YYYY-MM-DD)");
        }
        row.vals.resize(n, 0.0);
        row.present.resize(n, false);
        for (std::size_t c = 0; c < n; ++c) {
            std::string cell = trim(cells[c + 1]);
            if (cell.empty()) continue;
            char* end = nullptr;
            double v = std::strtod(cell.c_str(), &end);
            if (end != cell.c_str() + cell.size()) {
                throw DataError(origin + ":" + std::to_string(lineno) + ": cell '" + cell +
                                "' is not a number");
            }
            if (std::isnan(v)) continue;  // NaN cells count as missing
            if (!std::isfinite(v)) {
                throw DataError(origin + ":" + std::to_string(lineno) + ": non-finite value '" +
                                cell + "'");
            }
            row.vals[c] = v;
            row.present[c] = true;
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError(origin + ": no data rows");

    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].date == rows[i - 1].date) {
            throw DataError(origin + ": duplicate date " + rows[i].date);
        }
    }

    ReturnsPanel panel;
    panel.assets = std::move(assets);
    panel.dates.reserve(rows.size());
    panel.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n));
    panel.present.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        panel.dates.push_back(rows[r].date);
        for (std::size_t c = 0; c < n; ++c) {
            panel.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r].vals[c];
            panel.present(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r].present[c];
        }
    }
    return panel;
}

ReturnsPanel load_panel(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot open panel file: " + path);
    std::ostringstream buf;
    buf << file.rdbuf();
    return parse_panel_csv(buf.str(), path);
}

void save_panel(const ReturnsPanel& panel, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open output file: " + path);
    out << "date";
    for (const auto& a : panel.assets) out << ',' << a;
    out << '\n';
    char buf[64];
    for (std::ptrdiff_t r = 0; r < panel.rows(); ++r) {
        out << panel.dates[static_cast<std::size_t>(r)];
        for (std::ptrdiff_t c = 0; c < panel.cols(); ++c) {
            out << ',';
            if (!panel.present(r, c)) continue;
            auto res = std::to_chars(buf, buf + sizeof(buf), panel.values(r, c));
            out.write(buf, res.ptr - buf);
        }
        out << '\n';
    }
    if (!out) throw DataError("failed writing panel file: " + path);
}

std::vector<std::string> consecutive_dates(const std::string& first, std::size_t count) {
    if (!looks_like_iso_date(first)) throw DataError("malformed start date: " + first);
    int y = std::atoi(first.substr(0, 4).c_str());
    unsigned m = static_cast<unsigned>(std::atoi(first.substr(5, 2).c_str()));
    unsigned d = static_cast<unsigned>(std::atoi(first.substr(8, 2).c_str()));
    long serial = days_from_civil(y, m, d);

    std::vector<std::string> out;
    out.reserve(count);
    char buf[16];
    for (std::size_t i = 0; i < count; ++i) {
        civil_from_days(serial + static_cast<long>(i), y, m, d);
        std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", y, m, d);
        out.emplace_back(buf);
    }
    return out;
}

std::vector<int> filter_assets(const ReturnsPanel& panel, const IndexRange& train,
                               double max_missing_frac, double max_pair_corr) {
    if (!(IndexRange{0, panel.rows()}.contains(train)) || train.length() < 2) {
        throw DataError("filter_assets: train range outside panel or too short");
    }
    if (!(max_missing_frac > 0.0 && max_missing_frac < 1.0)) {
        throw DataError("filter_assets: max_missing_frac must lie in (0, 1)");
    }
    if (!(max_pair_corr > 0.0 && max_pair_corr <= 1.0)) {
        throw DataError("filter_assets: max_pair_corr must lie in (0, 1]");
    }

    const auto t = static_cast<double>(train.length());
    std::vector<int> survivors;
    for (int c = 0; c < static_cast<int>(panel.cols()); ++c) {
        std::ptrdiff_t bad = 0;
        for (std::ptrdiff_t r = train.begin; r < train.end; ++r) {
            if (!panel.present(r, c) || panel.values(r, c) == 0.0) ++bad;
        }
        if (static_cast<double>(bad) / t < max_missing_frac) survivors.push_back(c);
    }

    // Pairwise correlation over rows where both assets are present.
    auto pair_corr = [&](int a, int b) {
        double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
        std::ptrdiff_t m = 0;
        for (std::ptrdiff_t r = train.begin; r < train.end; ++r) {
            if (!panel.present(r, a) || !panel.present(r, b)) continue;
            double x = panel.values(r, a), y = panel.values(r, b);
            sa += x; sb += y; saa += x * x; sbb += y * y; sab += x * y;
            ++m;
        }
        if (m < 2) return 0.0;
        double mm = static_cast<double>(m);
        double cov = sab - sa * sb / mm;
        double va = saa - sa * sa / mm;
        double vb = sbb - sb * sb / mm;
        if (va <= 0.0 || vb <= 0.0) return 0.0;
        return cov / std::sqrt(va * vb);
    };

    std::vector<int> kept;
    for (int candidate : survivors) {
        bool duplicate = false;
        for (int earlier : kept) {
            if (pair_corr(earlier, candidate) > max_pair_corr) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) kept.push_back(candidate);
    }

    if (kept.empty()) throw DataError("filter_assets: every asset was filtered out");
    return kept;
}

Matrix standardize(const Eigen::Ref<const Matrix>& slice, const BoolMatrix& present,
                   const std::vector<std::string>& labels) {
    if (present.rows() != slice.rows() || present.cols() != slice.cols()) {
        throw DataError("standardize: mask shape does not match slice");
    }
    const Eigen::Index t = slice.rows();
    const Eigen::Index n = slice.cols();
    Matrix out = Matrix::Zero(t, n);

    for (Eigen::Index c = 0; c < n; ++c) {
        double sum = 0;
        Eigen::Index m = 0;
        for (Eigen::Index r = 0; r < t; ++r) {
            if (present(r, c)) {
                sum += slice(r, c);
                ++m;
            }
        }
        auto column_name = [&]() {
            return c < static_cast<Eigen::Index>(labels.size())
                       ? labels[static_cast<std::size_t>(c)]
                       : "column " + std::to_string(c);
        };
        if (m < 2) {
            throw DataError("standardize: fewer than 2 observations for " + column_name());
        }
        double mean = sum / static_cast<double>(m);
        double ss = 0;
        for (Eigen::Index r = 0; r < t; ++r) {
            if (present(r, c)) {
                double d = slice(r, c) - mean;
                ss += d * d;
            }
        }
        double var = ss / static_cast<double>(m - 1);
        if (var <= 0.0) {
            throw DataError("standardize: zero variance in " + column_name());
        }
        double inv_sd = 1.0 / std::sqrt(var);
        for (Eigen::Index r = 0; r < t; ++r) {
            if (present(r, c)) out(r, c) = (slice(r, c) - mean) * inv_sd;
        }
    }
    return out;
}

Matrix standardize(const Eigen::Ref<const Matrix>& slice, const std::vector<std::string>& labels) {
    BoolMatrix all = BoolMatrix::Constant(slice.rows(), slice.cols(), true);
    return standardize(slice, all, labels);
}

std::vector<std::size_t> shuffle_permutation(std::size_t count, std::uint64_t seed) {
    std::vector<std::size_t> perm(count);
    std::iota(perm.begin(), perm.end(), 0);
    auto eng = rng::engine(seed, {rng::stream::shuffle});
    for (std::size_t i = count; i > 1; --i) {
        std::size_t j = rng::uniform_below(eng, i);
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

std::pair<Matrix, Matrix> shuffle_pair(const Eigen::Ref<const Matrix>& union_slice,
                                       std::uint64_t seed, std::ptrdiff_t delta_train,
                                       std::ptrdiff_t delta) {
    if (union_slice.rows() != delta_train + delta) {
        throw DataError("shuffle_pair: slice must have delta_train + delta rows");
    }
    const auto perm = shuffle_permutation(static_cast<std::size_t>(union_slice.rows()), seed);

    Matrix prev(delta_train, union_slice.cols());
    Matrix next(delta, union_slice.cols());
    for (std::ptrdiff_t r = 0; r < delta_train; ++r) {
        prev.row(r) = union_slice.row(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(r)]));
    }
    for (std::ptrdiff_t r = 0; r < delta; ++r) {
        next.row(r) = union_slice.row(
            static_cast<Eigen::Index>(perm[static_cast<std::size_t>(delta_train + r)]));
    }
    return {std::move(prev), std::move(next)};
}

std::vector<IntervalPair> sample_interval_pairs(const IndexRange& calibration,
                                                std::ptrdiff_t delta_train, std::ptrdiff_t delta,
                                                std::size_t count, std::uint64_t seed) {
    if (delta_train < 2 || delta < 2) {
        throw DataError("sample_interval_pairs: window lengths must be >= 2");
    }
    const std::ptrdiff_t positions = calibration.length() - delta_train - delta + 1;
    if (positions <= 0) {
        throw InfeasibleWindowError(
            "sample_interval_pairs: calibration range of length " +
            std::to_string(calibration.length()) + " cannot host delta_train + delta = " +
            std::to_string(delta_train + delta) + " observations");
    }

    auto eng = rng::engine(seed, {rng::stream::calibration});
    std::vector<IntervalPair> pairs;
    pairs.reserve(count);
    for (std::size_t b = 0; b < count; ++b) {
        auto offset = static_cast<std::ptrdiff_t>(
            rng::uniform_below(eng, static_cast<std::uint64_t>(positions)));
        std::ptrdiff_t split = calibration.begin + delta_train + offset;
        pairs.push_back(IntervalPair{{split - delta_train, split}, {split, split + delta}});
    }
    return pairs;
}

} // namespace covkit
