#include "covkit/experiments.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "covkit/errors.hpp"
#include "covkit/metrics.hpp"
#include "covkit/parallel.hpp"
#include "covkit/rng.hpp"

namespace covkit {

namespace {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mean_and_se(const std::vector<double>& xs) {
    MeanSe out;
    if (xs.empty()) return out;
    double sum = 0;
    for (double x : xs) sum += x;
    out.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0;
        for (double x : xs) {
            double d = x - out.mean;
            ss += d * d;
        }
        out.se = std::sqrt(ss / static_cast<double>(xs.size() - 1) /
                           static_cast<double>(xs.size()));
    }
    return out;
}

double synth_bench_gap(const SynthBenchConfig& config, double rotation_sd, int replication) {
    const std::uint64_t rep_seed =
        rng::derive(config.seed, {std::bit_cast<std::uint64_t>(rotation_sd),
                                  static_cast<std::uint64_t>(replication)});

    SynthConfig synth;
    synth.n = config.n;
    synth.record_count = config.record_count;
    synth.rotation_sd = rotation_sd;
    synth.lambda_min = config.lambda_min;
    synth.lambda_ratio = config.lambda_ratio;
    synth.law = config.law;
    synth.student_dof = config.student_dof;
    synth.seed = rep_seed;
    synth.basis_stride = config.record_count;  // endpoints only; bases unused here
    SynthPath path = generate(synth);

    const long cal_len = config.record_count - config.delta_test;
    const long window = config.delta_train + config.delta_test;
    const long positions = cal_len - window + 1;
    if (positions <= 0) throw InfeasibleWindowError("synth benchmark: record count too small");

    const int n = config.n;
    Matrix ordered_sum = Matrix::Zero(n, n);
    Matrix shuffled_sum = Matrix::Zero(n, n);

    auto eng = rng::engine(rep_seed, {rng::stream::calibration});
    for (std::uint64_t b = 0; b < config.overlap_samples; ++b) {
        auto offset = static_cast<long>(rng::uniform_below(eng, static_cast<std::uint64_t>(positions)));
        Matrix prev = path.data.middleRows(offset, config.delta_train);
        Matrix next = path.data.middleRows(offset + config.delta_train, config.delta_test);

        EigenSystem prev_es = eigendecompose(sample_covariance(prev));
        EigenSystem next_es = eigendecompose(sample_covariance(next));
        ordered_sum += overlap(prev_es.eigenvectors, next_es.eigenvectors);

        Matrix both(window, n);
        both.topRows(config.delta_train) = prev;
        both.bottomRows(config.delta_test) = next;
        auto [sprev, snext] = shuffle_pair(both, rng::derive(rep_seed, {rng::stream::shuffle, b}),
                                           config.delta_train, config.delta_test);
        EigenSystem sprev_es = eigendecompose(sample_covariance(sprev));
        EigenSystem snext_es = eigendecompose(sample_covariance(snext));
        shuffled_sum += overlap(sprev_es.eigenvectors, snext_es.eigenvectors);
    }

    const double b_count = static_cast<double>(config.overlap_samples);
    Vector lambda_ordered = ao_from_true(ordered_sum / b_count, path.lambda_true);
    Vector lambda_shuffled = ao_from_true(shuffled_sum / b_count, path.lambda_true);

    Matrix train_tail = path.data.middleRows(cal_len - config.delta_train, config.delta_train);
    EigenSystem train_es = eigendecompose(sample_covariance(train_tail));
    Matrix sigma_test = sample_covariance(path.data.bottomRows(config.delta_test));

    Matrix est_ordered = train_es.eigenvectors * lambda_ordered.asDiagonal() *
                         train_es.eigenvectors.transpose();
    Matrix est_shuffled = train_es.eigenvectors * lambda_shuffled.asDiagonal() *
                          train_es.eigenvectors.transpose();

    return frobenius(est_ordered, sigma_test) - frobenius(est_shuffled, sigma_test);
}

} // namespace

std::vector<SynthBenchPoint> run_synth_benchmark(const SynthBenchConfig& config) {
    if (config.replications < 1) throw DataError("synth benchmark: replications must be >= 1");
    if (config.rotation_sds.empty()) throw DataError("synth benchmark: empty s grid");
    if (config.overlap_samples == 0) throw DataError("synth benchmark: need overlap samples");

    struct Task {
        std::size_t s_index;
        int replication;
    };
    std::vector<Task> tasks;
    tasks.reserve(config.rotation_sds.size() * static_cast<std::size_t>(config.replications));
    for (std::size_t s = 0; s < config.rotation_sds.size(); ++s) {
        for (int r = 0; r < config.replications; ++r) tasks.push_back(Task{s, r});
    }

    auto gaps = parallel_map<double>(tasks.size(), config.workers, [&](std::size_t i) {
        return synth_bench_gap(config, config.rotation_sds[tasks[i].s_index], tasks[i].replication);
    });

    std::vector<SynthBenchPoint> points(config.rotation_sds.size());
    for (std::size_t s = 0; s < config.rotation_sds.size(); ++s) {
        points[s].rotation_sd = config.rotation_sds[s];
        points[s].gaps.reserve(static_cast<std::size_t>(config.replications));
    }
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        points[tasks[i].s_index].gaps.push_back(gaps[i]);
    }
    for (auto& p : points) {
        MeanSe ms = mean_and_se(p.gaps);
        p.mean_gap = ms.mean;
        p.std_error = ms.se;
    }
    return points;
}

EntropyExperimentResult entropy_experiment(const ReturnsPanel& panel, const IndexRange& calibration,
                                           std::ptrdiff_t delta_train, std::ptrdiff_t delta,
                                           std::uint64_t samples, int n, std::uint64_t seed,
                                           const CalibrationOptions& options,
                                           int bootstrap_resamples) {
    if (samples == 0) throw DataError("entropy experiment: need at least one sample");
    if (options.shuffle) {
        throw DataError("entropy experiment: pairs its own shuffle; pass shuffle = false");
    }

    // Per-draw entropy profiles, ordered and shuffled on the same draw.
    Matrix ordered(samples, n);
    Matrix shuffled(samples, n);

    parallel_chunks(samples, options.workers, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            PairDraw draw = draw_pair_sample(panel, calibration, delta_train, delta, n, seed,
                                             static_cast<std::uint64_t>(i), options);
            EigenSystem prev_es = eigendecompose(sample_covariance(draw.prev_std));
            EigenSystem next_es = eigendecompose(sample_covariance(draw.next_std));
            ordered.row(static_cast<Eigen::Index>(i)) =
                overlap_entropy(overlap(prev_es.eigenvectors, next_es.eigenvectors)).transpose();

            // Shuffle the raw union, re-split, re-standardize. A degenerate
            // column after re-splitting triggers a salted retry.
            const std::ptrdiff_t rows = delta_train + delta;
            for (int attempt = 0;; ++attempt) {
                if (attempt >= options.retry_cap) {
                    throw InfeasibleWindowError(
                        "entropy experiment: shuffled split kept failing standardization");
                }
                auto perm = shuffle_permutation(
                    static_cast<std::size_t>(rows),
                    rng::derive(seed, {rng::stream::shuffle, static_cast<std::uint64_t>(i),
                                       static_cast<std::uint64_t>(attempt)}));
                Matrix pv(delta_train, n), nv(delta, n);
                BoolMatrix pm(delta_train, n), nm(delta, n);
                for (std::ptrdiff_t r = 0; r < delta_train; ++r) {
                    auto src = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(r)]);
                    pv.row(r) = draw.union_values.row(src);
                    pm.row(r) = draw.union_mask.row(src);
                }
                for (std::ptrdiff_t r = 0; r < delta; ++r) {
                    auto src = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(delta_train + r)]);
                    nv.row(r) = draw.union_values.row(src);
                    nm.row(r) = draw.union_mask.row(src);
                }
                try {
                    EigenSystem sp = eigendecompose(sample_covariance(standardize(pv, pm)));
                    EigenSystem sn = eigendecompose(sample_covariance(standardize(nv, nm)));
                    shuffled.row(static_cast<Eigen::Index>(i)) =
                        overlap_entropy(overlap(sp.eigenvectors, sn.eigenvectors)).transpose();
                    break;
                } catch (const DataError&) {
                    continue;
                }
            }
        }
    });

    EntropyExperimentResult res;
    res.samples = samples;
    res.ordered_mean = ordered.colwise().mean();
    res.shuffled_mean = shuffled.colwise().mean();
    res.diff_mean = res.ordered_mean - res.shuffled_mean;
    res.bands_defined = samples > 1;

    res.ordered_lo = res.ordered_mean;
    res.ordered_hi = res.ordered_mean;
    res.shuffled_lo = res.shuffled_mean;
    res.shuffled_hi = res.shuffled_mean;
    res.diff_lo = res.diff_mean;
    res.diff_hi = res.diff_mean;
    if (!res.bands_defined || bootstrap_resamples < 2) return res;

    const auto nboot = static_cast<std::size_t>(bootstrap_resamples);
    Matrix boot_ordered(nboot, n), boot_shuffled(nboot, n), boot_diff(nboot, n);
    auto eng = rng::engine(seed, {rng::stream::bootstrap});
    for (std::size_t r = 0; r < nboot; ++r) {
        Vector sum_o = Vector::Zero(n), sum_s = Vector::Zero(n);
        for (std::uint64_t k = 0; k < samples; ++k) {
            auto idx = static_cast<Eigen::Index>(rng::uniform_below(eng, samples));
            sum_o += ordered.row(idx);
            sum_s += shuffled.row(idx);
        }
        boot_ordered.row(static_cast<Eigen::Index>(r)) = sum_o / static_cast<double>(samples);
        boot_shuffled.row(static_cast<Eigen::Index>(r)) = sum_s / static_cast<double>(samples);
        boot_diff.row(static_cast<Eigen::Index>(r)) =
            boot_ordered.row(static_cast<Eigen::Index>(r)) -
            boot_shuffled.row(static_cast<Eigen::Index>(r));
    }

    auto percentile_bands = [&](const Matrix& boot, Vector& lo, Vector& hi) {
        lo.resize(n);
        hi.resize(n);
        std::vector<double> col(nboot);
        for (int c = 0; c < n; ++c) {
            for (std::size_t r = 0; r < nboot; ++r) col[r] = boot(static_cast<Eigen::Index>(r), c);
            std::sort(col.begin(), col.end());
            lo(c) = col[static_cast<std::size_t>(0.025 * static_cast<double>(nboot - 1))];
            hi(c) = col[static_cast<std::size_t>(0.975 * static_cast<double>(nboot - 1))];
        }
    };
    percentile_bands(boot_ordered, res.ordered_lo, res.ordered_hi);
    percentile_bands(boot_shuffled, res.shuffled_lo, res.shuffled_hi);
    percentile_bands(boot_diff, res.diff_lo, res.diff_hi);
    return res;
}

EigStabilityResult eigenvalue_stability_experiment(const ReturnsPanel& panel,
                                                   const IndexRange& calibration,
                                                   const IndexRange& test, std::ptrdiff_t delta_train,
                                                   std::ptrdiff_t delta, std::uint64_t samples, int n,
                                                   std::uint64_t seed,
                                                   const CalibrationOptions& options,
                                                   int bootstrap_resamples) {
    if (calibration.end > test.begin) {
        throw DataError("eigenvalue stability: calibration range must precede the test range");
    }
    if (samples == 0) throw DataError("eigenvalue stability: need at least one sample");

    // Phase 1: <lambda_next> from the calibration range.
    Vector mean_next = Vector::Zero(n);
    {
        std::vector<Vector> partials(chunk_count(samples), Vector::Zero(n));
        parallel_chunks(samples, options.workers, [&](std::size_t chunk, std::size_t b, std::size_t e) {
            Vector acc = Vector::Zero(n);
            for (std::size_t i = b; i < e; ++i) {
                PairDraw draw = draw_pair_sample(panel, calibration, delta_train, delta, n, seed,
                                                 static_cast<std::uint64_t>(i), options);
                acc += eigendecompose(sample_covariance(draw.next_std)).eigenvalues;
            }
            partials[chunk] = acc;
        });
        for (const auto& p : partials) mean_next += p;
        mean_next /= static_cast<double>(samples);
    }

    // Phase 2: held-out draws from the test range (independent seed branch).
    const std::uint64_t test_seed = rng::derive(seed, {rng::stream::testing});
    std::vector<double> l1(samples), l2(samples);
    parallel_chunks(samples, options.workers, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            PairDraw draw = draw_pair_sample(panel, test, delta_train, delta, n, test_seed,
                                             static_cast<std::uint64_t>(i), options);
            Vector lambda_prev = eigendecompose(sample_covariance(draw.prev_std)).eigenvalues;
            Vector lambda_next = eigendecompose(sample_covariance(draw.next_std)).eigenvalues;
            l1[i] = eigenvalue_deviation(mean_next, lambda_next, DeviationNorm::l1) -
                    eigenvalue_deviation(lambda_prev, lambda_next, DeviationNorm::l1);
            l2[i] = eigenvalue_deviation(mean_next, lambda_next, DeviationNorm::l2) -
                    eigenvalue_deviation(lambda_prev, lambda_next, DeviationNorm::l2);
        }
    });

    EigStabilityResult res;
    res.mean_lambda_next = mean_next;
    res.l1_diff = std::move(l1);
    res.l2_diff = std::move(l2);
    res.l1_mean = mean_and_se(res.l1_diff).mean;
    res.l2_mean = mean_and_se(res.l2_diff).mean;
    res.degenerate = samples < 2;
    res.bootstrap_resamples = static_cast<std::uint64_t>(std::max(bootstrap_resamples, 0));

    if (!res.degenerate && bootstrap_resamples > 0) {
        auto eng = rng::engine(seed, {rng::stream::bootstrap});
        auto one_sided_p = [&](const std::vector<double>& xs, double observed_mean) {
            std::size_t opposite = 0;
            for (int r = 0; r < bootstrap_resamples; ++r) {
                double sum = 0;
                for (std::size_t k = 0; k < xs.size(); ++k) {
                    sum += xs[rng::uniform_below(eng, xs.size())];
                }
                double m = sum / static_cast<double>(xs.size());
                if (observed_mean < 0 ? m >= 0 : m <= 0) ++opposite;
            }
            return static_cast<double>(opposite) / static_cast<double>(bootstrap_resamples);
        };
        res.l1_p_value = one_sided_p(res.l1_diff, res.l1_mean);
        res.l2_p_value = one_sided_p(res.l2_diff, res.l2_mean);
    }
    return res;
}

ReturnsPanel panel_from_synth(const SynthPath& path, const std::string& start_date) {
    ReturnsPanel panel;
    const auto t = static_cast<std::size_t>(path.data.rows());
    const auto n = static_cast<std::size_t>(path.data.cols());
    panel.dates = consecutive_dates(start_date, t);
    panel.assets.reserve(n);
    for (std::size_t c = 0; c < n; ++c) panel.assets.push_back("S" + std::to_string(c + 1));
    panel.values = path.data;
    panel.present = BoolMatrix::Constant(path.data.rows(), path.data.cols(), true);
    return panel;
}

} // namespace covkit
