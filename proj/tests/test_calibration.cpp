#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "covkit/calibration.hpp"
#include "covkit/errors.hpp"
#include "covkit/experiments.hpp"
#include "test_util.hpp"

using namespace covkit;

namespace {

ReturnsPanel iid_panel(int rows, int cols, std::uint64_t seed) {
    ReturnsPanel p;
    p.dates = consecutive_dates("1995-01-02", static_cast<std::size_t>(rows));
    for (int c = 0; c < cols; ++c) p.assets.push_back("A" + std::to_string(c));
    p.values = testutil::random_gaussian(rows, cols, seed) * 0.01;
    p.present = BoolMatrix::Constant(rows, cols, true);
    return p;
}

AOCalibration tiny_calibration() {
    AOCalibration cal;
    cal.lambdas = Vector::LinSpaced(4, 0.2, 2.0);
    cal.n = 4;
    cal.delta_train = 30;
    cal.delta = 30;
    cal.samples = 17;
    cal.mode = AssetSamplingMode::random_subsets;
    cal.seed = 99;
    cal.range_begin_row = 0;
    cal.range_end_row = 500;
    cal.range_begin_date = "1995-01-02";
    cal.range_end_date = "1996-06-30";
    return cal;
}

} // namespace

TEST_CASE("calibrate_ao: B = 1 equals that sample's oracle eigenvalues") {
    ReturnsPanel p = iid_panel(400, 6, 5);
    CalibrationOptions opt;
    opt.workers = 1;
    AOCalibration cal = calibrate_ao(p, {0, 400}, 40, 40, 1, 6, 77, opt);

    PairDraw draw = draw_pair_sample(p, {0, 400}, 40, 40, 6, 77, 0, opt);
    EigenSystem prev = eigendecompose(sample_covariance(draw.prev_std));
    Vector expected =
        floor_eigenvalues(oracle_eigenvalues(prev.eigenvectors, sample_covariance(draw.next_std)));
    CHECK((cal.lambdas - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("calibrate_ao: rank-wise mean commutes with the trace") {
    ReturnsPanel p = iid_panel(600, 5, 6);
    AOCalibration cal = calibrate_ao(p, {0, 600}, 50, 50, 64, 5, 3);
    // every sample's oracle spectrum sums to trace of a correlation matrix = n
    CHECK(cal.lambdas.sum() == doctest::Approx(5.0).epsilon(1e-10));
}

TEST_CASE("calibrate_ao: deterministic and worker-count independent") {
    ReturnsPanel p = iid_panel(500, 6, 7);
    CalibrationOptions one;
    one.workers = 1;
    CalibrationOptions four;
    four.workers = 4;
    AOCalibration a = calibrate_ao(p, {0, 500}, 30, 30, 70, 4, 11, one);
    AOCalibration b = calibrate_ao(p, {0, 500}, 30, 30, 70, 4, 11, four);
    CHECK(a == b);
    AOCalibration c = calibrate_ao(p, {0, 500}, 30, 30, 70, 4, 12, one);
    CHECK_FALSE(a == c);
}

TEST_CASE("calibrate_ao: shuffled calibration on iid data is statistically equal") {
    // On iid data the shuffle destroys nothing; the two AO spectra must agree
    // within a 3-sigma bootstrap band of the mean.
    ReturnsPanel p = iid_panel(1500, 4, 8);
    const std::uint64_t B = 400;
    CalibrationOptions ordered;
    CalibrationOptions shuffled;
    shuffled.shuffle = true;
    AOCalibration a = calibrate_ao(p, {0, 1500}, 40, 40, B, 4, 21, ordered);
    AOCalibration b = calibrate_ao(p, {0, 1500}, 40, 40, B, 4, 21, shuffled);

    // bootstrap-scale SE proxy: oracle eigenvalue spread across samples is
    // O(lambda / sqrt(delta)); use a generous band
    for (int k = 0; k < 4; ++k) {
        double se = a.lambdas(k) / std::sqrt(static_cast<double>(B)) * 3.0;
        CHECK(std::abs(a.lambdas(k) - b.lambdas(k)) < 5.0 * se + 0.05);
    }
}

TEST_CASE("calibrate_ao: seed sensitivity stays within the bootstrap band") {
    // independent oracle for the standard error: per-sample oracle spectra
    // drawn directly, rank-wise sd / sqrt(B)
    ReturnsPanel p = iid_panel(3000, 4, 19);
    const std::uint64_t B = 300;
    CalibrationOptions opt;

    Matrix samples(B, 4);
    for (std::uint64_t b = 0; b < B; ++b) {
        PairDraw draw = draw_pair_sample(p, {0, 3000}, 40, 40, 4, 101, b, opt);
        EigenSystem prev = eigendecompose(sample_covariance(draw.prev_std));
        samples.row(static_cast<Eigen::Index>(b)) =
            oracle_eigenvalues(prev.eigenvectors, sample_covariance(draw.next_std)).transpose();
    }
    Vector se(4);
    for (int k = 0; k < 4; ++k) {
        Vector col = samples.col(k);
        double mean = col.mean();
        se(k) = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(B - 1) /
                          static_cast<double>(B));
    }

    AOCalibration a = calibrate_ao(p, {0, 3000}, 40, 40, B, 4, 101, opt);
    AOCalibration b = calibrate_ao(p, {0, 3000}, 40, 40, B, 4, 202, opt);
    for (int k = 0; k < 4; ++k) {
        // two independent means differ by sqrt(2) * se; 3-sigma band
        CHECK(std::abs(a.lambdas(k) - b.lambdas(k)) < 3.0 * std::sqrt(2.0) * se(k));
    }
}

TEST_CASE("calibrate_ao: spectrum depends on delta_train but only weakly on delta") {
    SynthConfig cfg;
    cfg.n = 20;
    cfg.record_count = 4000;
    cfg.rotation_sd = 0.0;
    cfg.lambda_ratio = 1.3;
    cfg.seed = 77;
    cfg.basis_stride = cfg.record_count;
    ReturnsPanel p = panel_from_synth(generate(cfg));

    // strong dependence on the train window length at the small ranks
    AOCalibration narrow = calibrate_ao(p, {0, 4000}, 30, 100, 300, 20, 9, {});
    AOCalibration wide = calibrate_ao(p, {0, 4000}, 250, 100, 300, 20, 9, {});
    CHECK(std::abs(narrow.lambdas(0) - wide.lambdas(0)) >
          0.5 * std::min(narrow.lambdas(0), wide.lambdas(0)));

    // weak sensitivity to the next-window length at fixed delta_train
    AOCalibration short_next = calibrate_ao(p, {0, 4000}, 100, 60, 300, 20, 9, {});
    AOCalibration long_next = calibrate_ao(p, {0, 4000}, 100, 250, 300, 20, 9, {});
    for (int k = 0; k < 20; ++k) {
        double scale = std::max(short_next.lambdas(k), long_next.lambdas(k));
        CHECK(std::abs(short_next.lambdas(k) - long_next.lambdas(k)) < 0.35 * scale);
    }
}

TEST_CASE("average_overlap: constant-covariance data with long windows is near identity") {
    SynthConfig cfg;
    cfg.n = 4;
    cfg.record_count = 6000;
    cfg.rotation_sd = 0.0;
    cfg.lambda_ratio = 2.5;
    cfg.seed = 78;
    cfg.basis_stride = cfg.record_count;
    ReturnsPanel p = panel_from_synth(generate(cfg));
    Matrix avg = average_overlap(p, {0, 6000}, 800, 800, 60, 4, 10, {});
    CHECK(avg.diagonal().minCoeff() > 0.8);
}

TEST_CASE("average_overlap: shuffling inflates the diagonal mass on rotating data") {
    SynthConfig cfg;
    cfg.n = 5;
    cfg.record_count = 3000;
    cfg.rotation_sd = 0.05;
    cfg.lambda_ratio = 2.0;
    cfg.seed = 79;
    cfg.basis_stride = cfg.record_count;
    ReturnsPanel p = panel_from_synth(generate(cfg));

    CalibrationOptions ordered;
    CalibrationOptions shuffled;
    shuffled.shuffle = true;
    Matrix h_ord = average_overlap(p, {0, 3000}, 50, 50, 200, 5, 11, ordered);
    Matrix h_shuf = average_overlap(p, {0, 3000}, 50, 50, 200, 5, 11, shuffled);
    CHECK(h_shuf.diagonal().sum() > h_ord.diagonal().sum());
}

TEST_CASE("calibrate_ao: infeasible window error") {
    ReturnsPanel p = iid_panel(50, 4, 9);
    CHECK_THROWS_AS(calibrate_ao(p, {0, 50}, 30, 30, 4, 4, 1), InfeasibleWindowError);
}

TEST_CASE("calibrate_ao: insufficient eligible assets errors after the retry cap") {
    ReturnsPanel p = iid_panel(300, 3, 10);
    // duplicate one column so the correlation filter always removes an asset
    p.values.col(2) = p.values.col(1);
    CalibrationOptions opt;
    opt.retry_cap = 5;
    CHECK_THROWS_AS(calibrate_ao(p, {0, 300}, 30, 30, 2, 3, 1, opt), InfeasibleWindowError);
}

TEST_CASE("apply_ao: unit spectrum gives the identity correlation estimate") {
    ReturnsPanel p = iid_panel(200, 4, 11);
    AOCalibration cal = tiny_calibration();
    cal.lambdas = Vector::Ones(4);
    Matrix x = standardize(p.values.topRows(60));
    FilteredCovariance fc = apply_ao(cal, x);
    CHECK((fc.matrix - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(fc.id == EstimatorId::average_oracle);
}

TEST_CASE("apply_ao: train spectrum reproduces the sample correlation") {
    ReturnsPanel p = iid_panel(200, 4, 12);
    Matrix x = standardize(p.values.topRows(80));
    Matrix corr = sample_covariance(x);
    AOCalibration cal = tiny_calibration();
    cal.lambdas = eigendecompose(corr).eigenvalues;
    FilteredCovariance fc = apply_ao(cal, x);
    CHECK((fc.matrix - corr).norm() / corr.norm() < 1e-10);
}

TEST_CASE("apply_ao: output trace equals the calibrated spectrum sum") {
    ReturnsPanel p = iid_panel(150, 5, 13);
    AOCalibration cal = tiny_calibration();
    cal.n = 5;
    cal.lambdas = Vector::LinSpaced(5, 0.1, 2.5);
    Matrix x = standardize(p.values.topRows(70));
    FilteredCovariance fc = apply_ao(cal, x);
    CHECK(fc.matrix.trace() == doctest::Approx(cal.lambdas.sum()).epsilon(1e-10));
    CHECK_THROWS_AS(apply_ao(cal, standardize(p.values.leftCols(4).topRows(70))), DataError);
}

TEST_CASE("average_overlap: rows and columns sum to one for any B") {
    ReturnsPanel p = iid_panel(700, 5, 14);
    for (std::uint64_t B : {1, 10, 100}) {
        Matrix avg = average_overlap(p, {0, 700}, 40, 40, B, 5, 31);
        for (int i = 0; i < 5; ++i) {
            CHECK(avg.row(i).sum() == doctest::Approx(1.0).epsilon(1e-8));
            CHECK(avg.col(i).sum() == doctest::Approx(1.0).epsilon(1e-8));
        }
    }
}

TEST_CASE("separability_diagnostic: B = 1 makes both sides identical") {
    ReturnsPanel p = iid_panel(300, 4, 15);
    SeparabilityDiagnostic diag = separability_diagnostic(p, {0, 300}, 40, 40, 1, 4, 41);
    CHECK((diag.coupled - diag.factored).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(diag.max_relative_deviation < 1e-10);
}

TEST_CASE("separability_diagnostic: close agreement on structured synthetic data") {
    SynthConfig cfg;
    cfg.n = 5;
    cfg.record_count = 2000;
    cfg.rotation_sd = 0.01;
    cfg.lambda_ratio = 2.0;
    cfg.seed = 16;
    cfg.basis_stride = cfg.record_count;
    ReturnsPanel p = panel_from_synth(generate(cfg));
    SeparabilityDiagnostic diag = separability_diagnostic(p, {0, 2000}, 50, 50, 400, 5, 42);
    CHECK(diag.correlation > 0.99);
    CHECK(diag.max_relative_deviation < 0.25);
}

TEST_CASE("calibration file: save/load round trip is bit exact") {
    AOCalibration cal = tiny_calibration();
    cal.lambdas(0) = 0.1234567890123456789;  // exercise full precision
    std::string path = "cal_roundtrip_test.bin";
    save_calibration(cal, path);
    AOCalibration loaded = load_calibration(path);
    CHECK(loaded == cal);

    cal.average_overlap = testutil::random_spd(4, 17);
    save_calibration(cal, path);
    loaded = load_calibration(path);
    CHECK(loaded == cal);
    std::remove(path.c_str());
}

TEST_CASE("calibration file: truncation fails the checksum") {
    AOCalibration cal = tiny_calibration();
    std::string path = "cal_truncated_test.bin";
    save_calibration(cal, path);

    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 5));
    out.close();

    CHECK_THROWS_WITH_AS(load_calibration(path), doctest::Contains("checksum"), DataError);
    std::remove(path.c_str());
}

TEST_CASE("calibration file: corrupted payload fails the checksum") {
    AOCalibration cal = tiny_calibration();
    std::string path = "cal_corrupt_test.bin";
    save_calibration(cal, path);
    {
        std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(40);
        char byte = 0x5a;
        f.write(&byte, 1);
    }
    CHECK_THROWS_WITH_AS(load_calibration(path), doctest::Contains("checksum"), DataError);
    std::remove(path.c_str());
}

TEST_CASE("calibration file: newer version is rejected") {
    AOCalibration cal = tiny_calibration();
    std::string path = "cal_version_test.bin";
    save_calibration(cal, path);

    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    bytes[6] = 2;  // bump the version field (offset 6, little-endian u16)
    // recompute the trailing checksum so only the version differs
    std::string body = bytes.substr(0, bytes.size() - 8);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : body) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    for (int i = 0; i < 8; ++i) bytes[bytes.size() - 8 + static_cast<std::size_t>(i)] =
        static_cast<char>((h >> (8 * i)) & 0xff);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();

    CHECK_THROWS_WITH_AS(load_calibration(path), doctest::Contains("version"), DataError);
    std::remove(path.c_str());
}

TEST_CASE("calibration file: wrong magic is rejected") {
    std::string path = "cal_magic_test.bin";
    std::ofstream out(path, std::ios::binary);
    out << "definitely not a calibration file";
    out.close();
    CHECK_THROWS_WITH_AS(load_calibration(path), doctest::Contains("magic"), DataError);
    std::remove(path.c_str());
}

TEST_CASE("draw_pair_sample: windows respect the pair invariants") {
    ReturnsPanel p = iid_panel(400, 5, 18);
    for (std::uint64_t b = 0; b < 20; ++b) {
        PairDraw d = draw_pair_sample(p, {50, 380}, 30, 25, 4, 5, b, {});
        CHECK(d.window.prev.length() == 30);
        CHECK(d.window.next.length() == 25);
        CHECK(d.window.prev.end == d.window.next.begin);
        CHECK(d.window.prev.begin >= 50);
        CHECK(d.window.next.end <= 380);
        CHECK(d.assets.size() == 4);
        CHECK(d.prev_std.rows() == 30);
        CHECK(d.next_std.rows() == 25);
    }
}
