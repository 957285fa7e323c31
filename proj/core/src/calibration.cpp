#include "covkit/calibration.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "covkit/errors.hpp"
#include "covkit/parallel.hpp"
#include "covkit/rng.hpp"

namespace covkit {

namespace {

constexpr char kMagic[6] = {'A', 'O', 'C', 'A', 'L', 'F'};
constexpr std::uint16_t kFormatVersion = 1;

// FNV-1a 64-bit, the trailing integrity checksum of calibration files.
std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

void put_u16(std::string& out, std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u64(out, bits);
}
void put_string(std::string& out, const std::string& s) {
    if (s.size() > 0xffff) throw DataError("calibration file: string field too long");
    put_u16(out, static_cast<std::uint16_t>(s.size()));
    out.append(s);
}

class Reader {
public:
    explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(raw(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(raw(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(raw(4)); }
    std::uint64_t u64() { return raw(8); }
    void skip(std::size_t count) {
        need(count);
        pos_ += count;
    }
    double f64() {
        std::uint64_t bits = raw(8);
        double v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }
    std::string str() {
        std::size_t len = u16();
        need(len);
        std::string s = bytes_.substr(pos_, len);
        pos_ += len;
        return s;
    }
    const std::string& bytes() const { return bytes_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

    void need(std::size_t count) {
        if (remaining() < count) throw DataError("calibration file: truncated");
    }

private:
    std::uint64_t raw(std::size_t count) {
        need(count);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < count; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += count;
        return v;
    }

    std::string bytes_;
    std::size_t pos_ = 0;
};

struct SlotResult {
    Vector oracle;       // per-sample oracle eigenvalues
    Vector lambda_next;  // next-window spectrum
    Matrix overlap2;     // squared overlap
    Matrix coupled;      // overlap2 * lambda_next (as a column)
};

enum SlotNeeds : unsigned {
    kNeedOracle = 1u << 0,
    kNeedOverlap = 1u << 1,
    kNeedCoupled = 1u << 2,
};

SlotResult compute_slot(const ReturnsPanel& panel, const IndexRange& calibration,
                        std::ptrdiff_t delta_train, std::ptrdiff_t delta, int n,
                        std::uint64_t seed, std::uint64_t index, const CalibrationOptions& options,
                        unsigned needs) {
    PairDraw draw = draw_pair_sample(panel, calibration, delta_train, delta, n, seed, index, options);

    EigenSystem prev = eigendecompose(sample_covariance(draw.prev_std));
    Matrix next_cov = sample_covariance(draw.next_std);

    SlotResult out;
    if (needs & kNeedOracle) {
        out.oracle = oracle_eigenvalues(prev.eigenvectors, next_cov);
    }
    if (needs & (kNeedOverlap | kNeedCoupled)) {
        EigenSystem next = eigendecompose(next_cov);
        out.overlap2 = overlap(prev.eigenvectors, next.eigenvectors);
        out.lambda_next = next.eigenvalues;
        if (needs & kNeedCoupled) out.coupled = out.overlap2 * next.eigenvalues;
    }
    return out;
}

struct Accumulated {
    Vector oracle_sum;
    Vector lambda_next_sum;
    Matrix overlap_sum;
    Vector coupled_sum;
};

Accumulated accumulate_slots(const ReturnsPanel& panel, const IndexRange& calibration,
                             std::ptrdiff_t delta_train, std::ptrdiff_t delta,
                             std::uint64_t samples, int n, std::uint64_t seed,
                             const CalibrationOptions& options, unsigned needs) {
    if (samples == 0) throw DataError("calibration: sample count must be >= 1");

    struct Partial {
        Vector oracle = Vector();
        Vector lambda_next = Vector();
        Matrix overlap = Matrix();
        Vector coupled = Vector();
        bool used = false;
    };
    std::vector<Partial> partials(chunk_count(samples));

    parallel_chunks(samples, options.workers, [&](std::size_t chunk, std::size_t b, std::size_t e) {
        Partial acc;
        acc.oracle = Vector::Zero(n);
        acc.lambda_next = Vector::Zero(n);
        acc.overlap = Matrix::Zero(n, n);
        acc.coupled = Vector::Zero(n);
        for (std::size_t i = b; i < e; ++i) {
            SlotResult slot = compute_slot(panel, calibration, delta_train, delta, n, seed,
                                           static_cast<std::uint64_t>(i), options, needs);
            if (needs & kNeedOracle) acc.oracle += slot.oracle;
            if (needs & (kNeedOverlap | kNeedCoupled)) {
                acc.overlap += slot.overlap2;
                acc.lambda_next += slot.lambda_next;
            }
            if (needs & kNeedCoupled) acc.coupled += slot.coupled;
        }
        acc.used = true;
        partials[chunk] = std::move(acc);
    });

    Accumulated total;
    total.oracle_sum = Vector::Zero(n);
    total.lambda_next_sum = Vector::Zero(n);
    total.overlap_sum = Matrix::Zero(n, n);
    total.coupled_sum = Vector::Zero(n);
    for (const auto& p : partials) {
        if (!p.used) continue;
        total.oracle_sum += p.oracle;
        total.lambda_next_sum += p.lambda_next;
        total.overlap_sum += p.overlap;
        total.coupled_sum += p.coupled;
    }
    return total;
}

} // namespace

std::string to_string(AssetSamplingMode mode) {
    return mode == AssetSamplingMode::fixed_set ? "fixed" : "random";
}

bool AOCalibration::operator==(const AOCalibration& other) const {
    auto same_matrix = [](const std::optional<Matrix>& a, const std::optional<Matrix>& b) {
        if (a.has_value() != b.has_value()) return false;
        if (!a) return true;
        return a->rows() == b->rows() && a->cols() == b->cols() && *a == *b;
    };
    return lambdas.size() == other.lambdas.size() && lambdas == other.lambdas && n == other.n &&
           delta_train == other.delta_train && delta == other.delta && samples == other.samples &&
           mode == other.mode && seed == other.seed && range_begin_row == other.range_begin_row &&
           range_end_row == other.range_end_row && range_begin_date == other.range_begin_date &&
           range_end_date == other.range_end_date && same_matrix(average_overlap, other.average_overlap);
}

PairDraw draw_pair_sample(const ReturnsPanel& panel, const IndexRange& calibration,
                          std::ptrdiff_t delta_train, std::ptrdiff_t delta, int n,
                          std::uint64_t seed, std::uint64_t index,
                          const CalibrationOptions& options) {
    if (n < 2) throw DataError("draw_pair_sample: need n >= 2 assets");
    if (delta_train < 2 || delta < 2) {
        throw DataError("draw_pair_sample: window lengths must be >= 2");
    }
    if (options.mode == AssetSamplingMode::fixed_set && n != panel.cols()) {
        throw DataError("draw_pair_sample: fixed asset mode requires n == panel width");
    }
    const std::ptrdiff_t positions = calibration.length() - delta_train - delta + 1;
    if (positions <= 0) {
        throw InfeasibleWindowError("draw_pair_sample: calibration range too short for delta_train + delta");
    }
    if (!IndexRange{0, panel.rows()}.contains(calibration)) {
        throw DataError("draw_pair_sample: calibration range outside panel");
    }

    auto eng = rng::engine(seed, {rng::stream::calibration, index});
    std::string last_reason = "no attempt made";

    for (int attempt = 0; attempt < options.retry_cap; ++attempt) {
        auto offset = static_cast<std::ptrdiff_t>(
            rng::uniform_below(eng, static_cast<std::uint64_t>(positions)));
        const std::ptrdiff_t split = calibration.begin + delta_train + offset;
        IntervalPair window{{split - delta_train, split}, {split, split + delta}};

        std::vector<int> eligible;
        try {
            eligible = filter_assets(panel, window.prev, options.max_missing_frac,
                                     options.max_pair_corr);
        } catch (const DataError& e) {
            last_reason = e.what();
            continue;
        }
        if (static_cast<int>(eligible.size()) < n) {
            last_reason = "only " + std::to_string(eligible.size()) + " eligible assets, need " +
                          std::to_string(n);
            continue;
        }

        std::vector<int> chosen;
        if (options.mode == AssetSamplingMode::fixed_set) {
            if (static_cast<int>(eligible.size()) != n) {
                last_reason = "fixed asset set not fully eligible in sampled window";
                continue;
            }
            chosen = eligible;
        } else {
            auto eng_assets = rng::engine(seed, {rng::stream::assets, index,
                                                 static_cast<std::uint64_t>(attempt)});
            auto picks = rng::sample_without_replacement(
                eng_assets, eligible.size(), static_cast<std::uint64_t>(n));
            chosen.reserve(picks.size());
            for (auto p : picks) chosen.push_back(eligible[static_cast<std::size_t>(p)]);
        }

        Matrix prev_vals = panel.slice(window.prev, chosen);
        Matrix next_vals = panel.slice(window.next, chosen);
        BoolMatrix prev_mask = panel.mask_slice(window.prev, chosen);
        BoolMatrix next_mask = panel.mask_slice(window.next, chosen);

        if (options.shuffle) {
            const auto rows = static_cast<std::size_t>(delta_train + delta);
            auto perm = shuffle_permutation(
                rows, rng::derive(seed, {rng::stream::shuffle, index,
                                         static_cast<std::uint64_t>(attempt)}));
            Matrix vals(delta_train + delta, prev_vals.cols());
            BoolMatrix mask(delta_train + delta, prev_vals.cols());
            vals.topRows(delta_train) = prev_vals;
            vals.bottomRows(delta) = next_vals;
            mask.topRows(delta_train) = prev_mask;
            mask.bottomRows(delta) = next_mask;
            Matrix pv(delta_train, vals.cols());
            Matrix nv(delta, vals.cols());
            BoolMatrix pm(delta_train, vals.cols());
            BoolMatrix nm(delta, vals.cols());
            for (std::ptrdiff_t r = 0; r < delta_train; ++r) {
                auto src = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(r)]);
                pv.row(r) = vals.row(src);
                pm.row(r) = mask.row(src);
            }
            for (std::ptrdiff_t r = 0; r < delta; ++r) {
                auto src = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(delta_train + r)]);
                nv.row(r) = vals.row(src);
                nm.row(r) = mask.row(src);
            }
            prev_vals = std::move(pv);
            next_vals = std::move(nv);
            prev_mask = std::move(pm);
            next_mask = std::move(nm);
        }

        std::vector<std::string> labels;
        labels.reserve(chosen.size());
        for (int c : chosen) labels.push_back(panel.assets[static_cast<std::size_t>(c)]);

        try {
            Matrix prev_std = standardize(prev_vals, prev_mask, labels);
            Matrix next_std = standardize(next_vals, next_mask, labels);
            Matrix union_values(delta_train + delta, prev_vals.cols());
            BoolMatrix union_mask(delta_train + delta, prev_vals.cols());
            union_values.topRows(delta_train) = prev_vals;
            union_values.bottomRows(delta) = next_vals;
            union_mask.topRows(delta_train) = prev_mask;
            union_mask.bottomRows(delta) = next_mask;
            return PairDraw{window,          std::move(chosen),       std::move(prev_std),
                            std::move(next_std), std::move(union_values), std::move(union_mask)};
        } catch (const DataError& e) {
            last_reason = e.what();
            continue;
        }
    }

    throw InfeasibleWindowError("draw_pair_sample: slot " + std::to_string(index) +
                                " exhausted " + std::to_string(options.retry_cap) +
                                " attempts; last failure: " + last_reason);
}

AOCalibration calibrate_ao(const ReturnsPanel& panel, const IndexRange& calibration,
                           std::ptrdiff_t delta_train, std::ptrdiff_t delta,
                           std::uint64_t samples, int n, std::uint64_t seed,
                           const CalibrationOptions& options) {
    Accumulated acc = accumulate_slots(panel, calibration, delta_train, delta, samples, n, seed,
                                       options, kNeedOracle);

    AOCalibration out;
    out.lambdas = floor_eigenvalues(acc.oracle_sum / static_cast<double>(samples));
    out.n = n;
    out.delta_train = static_cast<int>(delta_train);
    out.delta = static_cast<int>(delta);
    out.samples = samples;
    out.mode = options.mode;
    out.seed = seed;
    out.range_begin_row = calibration.begin;
    out.range_end_row = calibration.end;
    out.range_begin_date = panel.dates[static_cast<std::size_t>(calibration.begin)];
    out.range_end_date = panel.dates[static_cast<std::size_t>(calibration.end - 1)];
    return out;
}

FilteredCovariance apply_ao(const AOCalibration& calibration,
                            const Eigen::Ref<const Matrix>& x_train_std,
                            const WindowDescriptor& provenance) {
    if (x_train_std.cols() != calibration.n) {
        throw DataError("apply_ao: train window has " + std::to_string(x_train_std.cols()) +
                        " assets, calibration expects " + std::to_string(calibration.n));
    }
    EigenSystem train = eigendecompose(sample_covariance(x_train_std));
    return apply_rie(train.eigenvectors, calibration.lambdas, EstimatorId::average_oracle,
                     provenance);
}

Matrix average_overlap(const ReturnsPanel& panel, const IndexRange& calibration,
                       std::ptrdiff_t delta_train, std::ptrdiff_t delta, std::uint64_t samples,
                       int n, std::uint64_t seed, const CalibrationOptions& options) {
    Accumulated acc = accumulate_slots(panel, calibration, delta_train, delta, samples, n, seed,
                                       options, kNeedOverlap);
    return acc.overlap_sum / static_cast<double>(samples);
}

SeparabilityDiagnostic separability_diagnostic(const ReturnsPanel& panel,
                                               const IndexRange& calibration,
                                               std::ptrdiff_t delta_train, std::ptrdiff_t delta,
                                               std::uint64_t samples, int n, std::uint64_t seed,
                                               const CalibrationOptions& options) {
    Accumulated acc = accumulate_slots(panel, calibration, delta_train, delta, samples, n, seed,
                                       options, kNeedOverlap | kNeedCoupled);

    const double b = static_cast<double>(samples);
    SeparabilityDiagnostic diag;
    diag.coupled = acc.coupled_sum / b;
    diag.factored = (acc.overlap_sum / b) * (acc.lambda_next_sum / b);

    // Pearson correlation between the two rank profiles.
    Vector x = diag.coupled.array() - diag.coupled.mean();
    Vector y = diag.factored.array() - diag.factored.mean();
    double den = x.norm() * y.norm();
    diag.correlation = den > 0.0 ? x.dot(y) / den : 1.0;

    double max_dev = 0.0;
    for (Eigen::Index i = 0; i < diag.coupled.size(); ++i) {
        double scale = std::max(std::abs(diag.coupled(i)), 1e-300);
        max_dev = std::max(max_dev, std::abs(diag.coupled(i) - diag.factored(i)) / scale);
    }
    diag.max_relative_deviation = max_dev;
    return diag;
}

void save_calibration(const AOCalibration& calibration, const std::string& path) {
    if (calibration.lambdas.size() != calibration.n) {
        throw DataError("save_calibration: lambda vector length does not match n");
    }
    std::string buf;
    buf.append(kMagic, sizeof(kMagic));
    put_u16(buf, kFormatVersion);
    put_u32(buf, static_cast<std::uint32_t>(calibration.n));
    put_u32(buf, static_cast<std::uint32_t>(calibration.delta_train));
    put_u32(buf, static_cast<std::uint32_t>(calibration.delta));
    put_u64(buf, calibration.samples);
    put_u64(buf, calibration.seed);
    buf.push_back(static_cast<char>(calibration.mode));
    buf.push_back(calibration.average_overlap ? 1 : 0);
    put_u16(buf, 0);  // reserved
    put_u64(buf, static_cast<std::uint64_t>(calibration.range_begin_row));
    put_u64(buf, static_cast<std::uint64_t>(calibration.range_end_row));
    put_string(buf, calibration.range_begin_date);
    put_string(buf, calibration.range_end_date);
    for (Eigen::Index i = 0; i < calibration.lambdas.size(); ++i) {
        put_f64(buf, calibration.lambdas(i));
    }
    if (calibration.average_overlap) {
        const Matrix& m = *calibration.average_overlap;
        if (m.rows() != calibration.n || m.cols() != calibration.n) {
            throw DataError("save_calibration: overlap payload must be n x n");
        }
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(buf, m(r, c));
        }
    }
    put_u64(buf, fnv1a(buf));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open calibration file for writing: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("failed writing calibration file: " + path);
}

AOCalibration load_calibration(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open calibration file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    Reader reader(ss.str());

    reader.need(sizeof(kMagic) + 2);
    if (std::memcmp(reader.bytes().data(), kMagic, sizeof(kMagic)) != 0) {
        throw DataError(path + ": not a calibration file (bad magic)");
    }
    // Verify the trailing checksum before trusting any field.
    if (reader.bytes().size() < sizeof(kMagic) + 2 + 8) {
        throw DataError(path + ": truncated calibration file");
    }
    {
        const std::string& all = reader.bytes();
        std::string body = all.substr(0, all.size() - 8);
        Reader tail(all.substr(all.size() - 8));
        if (tail.u64() != fnv1a(body)) {
            throw DataError(path + ": checksum mismatch (file corrupted or truncated)");
        }
    }

    reader.skip(sizeof(kMagic));
    std::uint16_t version = reader.u16();
    if (version != kFormatVersion) {
        throw DataError(path + ": unsupported calibration format version " +
                        std::to_string(version) + " (expected " + std::to_string(kFormatVersion) + ")");
    }

    AOCalibration cal;
    cal.n = static_cast<int>(reader.u32());
    cal.delta_train = static_cast<int>(reader.u32());
    cal.delta = static_cast<int>(reader.u32());
    cal.samples = reader.u64();
    cal.seed = reader.u64();
    std::uint8_t mode = reader.u8();
    if (mode > 1) throw DataError(path + ": unknown asset sampling mode");
    cal.mode = static_cast<AssetSamplingMode>(mode);
    std::uint8_t has_overlap = reader.u8();
    reader.skip(2);  // reserved
    cal.range_begin_row = static_cast<std::int64_t>(reader.u64());
    cal.range_end_row = static_cast<std::int64_t>(reader.u64());
    cal.range_begin_date = reader.str();
    cal.range_end_date = reader.str();

    if (cal.n <= 0) throw DataError(path + ": invalid dimension in header");
    cal.lambdas.resize(cal.n);
    for (int i = 0; i < cal.n; ++i) cal.lambdas(i) = reader.f64();

    if (has_overlap) {
        Matrix m(cal.n, cal.n);
        for (int r = 0; r < cal.n; ++r) {
            for (int c = 0; c < cal.n; ++c) m(r, c) = reader.f64();
        }
        cal.average_overlap = std::move(m);
    }

    if (reader.remaining() != 8) {
        throw DataError(path + ": unexpected trailing bytes in calibration file");
    }
    return cal;
}

} // namespace covkit
