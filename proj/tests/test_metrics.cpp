#include <doctest.h>

#include <cmath>

#include "fedul/metrics.hpp"
#include "fedul/rng.hpp"

using namespace fedul;
using namespace fedul::metrics;

TEST_CASE("confusion counts the four cells") {
    const std::vector<int> preds = {1, 1, 0, 0};
    const std::vector<int> labels = {1, 0, 1, 0};
    const auto c = confusion(preds, labels);
    CHECK(c.tp == 1);
    CHECK(c.fp == 1);
    CHECK(c.fn == 1);
    CHECK(c.tn == 1);
}

TEST_CASE("confusion of perfect predictions has no errors") {
    const std::vector<int> v = {1, 0, 1, 1, 0};
    const auto c = confusion(v, v);
    CHECK(c.fp == 0);
    CHECK(c.fn == 0);
    CHECK(c.tp == 3);
    CHECK(c.tn == 2);
}

TEST_CASE("confusion counts sum to n for random vectors") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.next_below(200);
        std::vector<int> preds(n), labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            preds[i] = rng.bernoulli(0.5);
            labels[i] = rng.bernoulli(0.3);
        }
        CHECK(confusion(preds, labels).total() == n);
    }
}

TEST_CASE("confusion rejects mismatched lengths") {
    const std::vector<int> a = {1, 0}, b = {1};
    CHECK_THROWS(confusion(a, b));
}

TEST_CASE("fidelity from counts") {
    const auto r = fidelity({2, 1, 0, 1});
    CHECK(r.ppv == doctest::Approx(2.0 / 3.0));
    CHECK(r.tpr == doctest::Approx(2.0 / 3.0));
    CHECK(r.f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("fidelity zero-division convention gives zeros") {
    const auto r = fidelity({0, 0, 0, 5});
    CHECK(r.ppv == 0.0);
    CHECK(r.tpr == 0.0);
    CHECK(r.f1 == 0.0);
}

TEST_CASE("f1 lies between ppv and tpr when both positive") {
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        ConfusionCounts c{1 + rng.next_below(50), rng.next_below(50), rng.next_below(50),
                          rng.next_below(50)};
        const auto r = fidelity(c);
        if (r.ppv > 0.0 && r.tpr > 0.0) {
            CHECK(r.f1 >= std::min(r.ppv, r.tpr) - 1e-12);
            CHECK(r.f1 <= std::max(r.ppv, r.tpr) + 1e-12);
        }
    }
}

TEST_CASE("residual norm basics") {
    const std::vector<double> a = {0.2, 0.4, 0.6, 0.8};
    CHECK(residual_norm(a, a, CertifiabilityScore::EvalSet::full_data).residual_norm == 0.0);

    std::vector<double> b = a;
    for (double& v : b) v += 0.1;
    CHECK(residual_norm(a, b, CertifiabilityScore::EvalSet::full_data).residual_norm ==
          doctest::Approx(0.1));
}

TEST_CASE("residual norm is a metric on random vectors") {
    Rng rng(13);
    const auto kind = CertifiabilityScore::EvalSet::forget_set;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.next_below(40);
        std::vector<double> u(n), v(n), w(n);
        for (std::size_t i = 0; i < n; ++i) {
            u[i] = rng.next_double();
            v[i] = rng.next_double();
            w[i] = rng.next_double();
        }
        const double uv = residual_norm(u, v, kind).residual_norm;
        const double vu = residual_norm(v, u, kind).residual_norm;
        const double uw = residual_norm(u, w, kind).residual_norm;
        const double wv = residual_norm(w, v, kind).residual_norm;
        CHECK(uv == vu);
        CHECK(uv <= uw + wv + 1e-12);
        CHECK(residual_norm(u, u, kind).residual_norm == 0.0);
    }
}

TEST_CASE("rounds_to_convergence on a constant curve is 1") {
    const std::vector<double> flat(40, 0.61);
    CHECK(rounds_to_convergence(flat, 0.02, 5) == 1);
}

TEST_CASE("rounds_to_convergence finds the settling round") {
    // climbs to the final value at round 7, flat after
    std::vector<double> curve = {0.1, 0.2, 0.3, 0.4, 0.45, 0.5, 0.6};
    curve.resize(20, 0.6);
    CHECK(rounds_to_convergence(curve, 0.02, 5) == 7);
}

TEST_CASE("rounds_to_convergence is monotone non-increasing in epsilon") {
    Rng rng(14);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> curve(30);
        for (double& v : curve) v = rng.next_double();
        std::size_t prev = 0;
        for (double eps : {0.01, 0.05, 0.1, 0.3, 1.0}) {
            const std::size_t r = rounds_to_convergence(curve, eps, 4);
            if (prev > 0) CHECK(r <= prev);
            prev = r;
        }
    }
}

TEST_CASE("summarize_runs mean and sample std") {
    {
        const std::vector<double> v = {1.0, 1.0, 1.0};
        const auto s = summarize_runs(v);
        CHECK(s.mean == doctest::Approx(1.0));
        CHECK(s.stddev == doctest::Approx(0.0));
    }
    {
        const std::vector<double> v = {0.0, 2.0};
        const auto s = summarize_runs(v);
        CHECK(s.mean == doctest::Approx(1.0));
        CHECK(s.stddev == doctest::Approx(std::sqrt(2.0)));
    }
}

TEST_CASE("summarize_runs is permutation invariant") {
    std::vector<double> v = {0.3, 0.9, 0.1, 0.5, 0.7};
    const auto a = summarize_runs(v);
    std::reverse(v.begin(), v.end());
    const auto b = summarize_runs(v);
    CHECK(a.mean == doctest::Approx(b.mean));
    CHECK(a.stddev == doctest::Approx(b.stddev));
}

TEST_CASE("summarize_runs warns on a single value and rejects none") {
    const std::vector<double> one = {0.4};
    const auto s = summarize_runs(one);
    CHECK(s.stddev == 0.0);
    CHECK(!s.warnings.empty());
    CHECK_THROWS(summarize_runs(std::vector<double>{}));
}
