#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "gvfswitch/gvf.hpp"

using namespace gvfswitch;

namespace {

FeatureVector fv(std::vector<std::uint32_t> active, std::uint32_t total) { return {std::move(active), total}; }

LearnerParams params(double alpha_base, double lambda) {
  LearnerParams p;
  p.alpha_base = alpha_base;
  p.lambda = lambda;
  p.trace_epsilon = 0.0;
  return p;
}

}  // namespace

TEST_CASE("question gamma") {
  CHECK(make_question("a", "switch_pulse", 10).gamma() == doctest::Approx(0.9));
  CHECK(make_question("a", "switch_pulse", 1).gamma() == 0.0);
  CHECK_THROWS_AS(make_question("a", "switch_pulse", 0), ConfigError);
  CHECK_THROWS_AS(make_question("a", "torque", 10), ConfigError);
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(validate_params(params(0.0, 0.5)), ConfigError);
  CHECK_THROWS_AS(validate_params(params(1.5, 0.5)), ConfigError);
  CHECK_THROWS_AS(validate_params(params(0.1, -0.1)), ConfigError);
  CHECK_THROWS_AS(validate_params(params(0.1, 1.1)), ConfigError);
  CHECK_NOTHROW(validate_params(params(1.0, 1.0)));
}

TEST_CASE("effective step size") {
  GvfLearner l(make_question("q", "constant", 10), params(0.1, 0.9), 16u, 25);
  CHECK(l.alpha() == doctest::Approx(0.1 / 25));
  CHECK(l.alpha() <= 0.1);
}

TEST_CASE("predict") {
  GvfLearner l(make_question("q", "constant", 10), params(0.1, 0.9), 16u, 2);
  CHECK(l.predict(fv({0, 3, 9}, 16)) == 0.0);
  l.weights()[0] = 0.5;
  l.weights()[7] = 1.25;
  CHECK(l.predict(fv({0, 7}, 16)) == 1.75);
  CHECK(l.last_prediction() == 1.75);
  CHECK_THROWS_AS(l.predict(fv({0}, 17)), ConfigError);
}

TEST_CASE("predict is linear in w") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  GvfLearner l(make_question("q", "constant", 10), params(0.1, 0.9), 64u, 5);
  for (auto& w : l.weights()) w = u(rng);
  const auto x = fv({0, 5, 17, 40, 63}, 64);
  const double v = l.predict(x);
  for (auto& w : l.weights()) w *= 2;
  CHECK(l.predict(x) == doctest::Approx(2 * v));
}

TEST_CASE("single tabular step") {
  GvfLearner l(make_question("q", "constant", 2), params(1.0, 0.0), 4u, 1);
  const double delta = l.update(fv({1}, 4), 1.0, fv({2}, 4));
  CHECK(delta == 1.0);
  CHECK(l.weights()[1] == 1.0);
  CHECK(l.weights()[2] == 0.0);
}

TEST_CASE("zero cumulant with zero weights") {
  GvfLearner l(make_question("q", "constant", 10), params(0.5, 0.9), 8u, 2);
  for (int t = 0; t < 20; ++t) CHECK(l.update(fv({0, static_cast<std::uint32_t>(1 + t % 5)}, 8), 0.0, fv({0, static_cast<std::uint32_t>(1 + (t + 1) % 5)}, 8)) == 0.0);
  for (double w : l.weights()) CHECK(w == 0.0);
}

TEST_CASE("update order of operations against a dense oracle") {
  // Dense reference TD(lambda) with accumulating traces.
  const std::uint32_t n = 12;
  const double gamma = 0.75, lambda = 0.6, alpha = 0.3 / 3;
  std::vector<double> w(n, 0.0), z(n, 0.0);
  GvfLearner l(make_question("q", "constant", 4), params(0.3, lambda), n, 3);
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::uint32_t> pick(1, n - 1);
  std::uniform_real_distribution<double> cum(0, 1);
  auto draw = [&] {
    std::vector<std::uint32_t> a{0, pick(rng), pick(rng)};
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return fv(a, n);
  };
  FeatureVector x = draw();
  for (int t = 0; t < 300; ++t) {
    const FeatureVector next = draw();
    const double c = cum(rng);
    double vt = 0, vn = 0;
    for (auto i : x.active) vt += w[i];
    for (auto i : next.active) vn += w[i];
    const double delta = c + gamma * vn - vt;
    for (auto& zi : z) zi *= gamma * lambda;
    for (auto i : x.active) z[i] += 1.0;
    for (std::uint32_t i = 0; i < n; ++i) w[i] += alpha * delta * z[i];
    CHECK(l.update(x, c, next) == doctest::Approx(delta).epsilon(1e-12));
    x = next;
  }
  for (std::uint32_t i = 0; i < n; ++i) CHECK(l.weights()[i] == doctest::Approx(w[i]).epsilon(1e-10));
}

TEST_CASE("replacing traces") {
  LearnerParams p = params(0.5, 1.0);
  p.replacing_traces = true;
  GvfLearner l(make_question("q", "constant", 2), p, 4u, 1);
  l.update(fv({1}, 4), 0.0, fv({1}, 4));
  l.update(fv({1}, 4), 0.0, fv({1}, 4));
  CHECK(l.trace().at(1) == 1.0);
  GvfLearner acc(make_question("q", "constant", 2), params(0.5, 1.0), 4u, 1);
  acc.update(fv({1}, 4), 0.0, fv({1}, 4));
  acc.update(fv({1}, 4), 0.0, fv({1}, 4));
  CHECK(acc.trace().at(1) == doctest::Approx(1.5));
}

TEST_CASE("sparse trace drops tiny entries") {
  SparseTrace z;
  const std::uint32_t a[] = {3};
  z.decay_and_mark(0.5, a, false, 0.1);
  CHECK(z.size() == 1);
  for (int k = 0; k < 3; ++k) z.decay_and_mark(0.5, {}, false, 0.1);
  CHECK(z.at(3) == doctest::Approx(0.125));
  z.decay_and_mark(0.5, {}, false, 0.1);
  CHECK(z.size() == 0);
}

TEST_CASE("two-state cycle converges to the Bellman pair") {
  // V(A) = 1 + 0.5 V(B), V(B) = 0.5 V(A)
  GvfLearner l(make_question("q", "constant", 2), params(0.1, 0.0), 3u, 1);
  const auto A = fv({1}, 3), B = fv({2}, 3);
  for (int t = 0; t < 4000; ++t) {
    l.update(A, 1.0, B);
    l.update(B, 0.0, A);
  }
  CHECK(std::abs(l.predict(A) - 4.0 / 3.0) < 1e-3);
  CHECK(std::abs(l.predict(B) - 2.0 / 3.0) < 1e-3);
}

TEST_CASE("lambda one offline pass equals Monte-Carlo returns") {
  const double gamma = 0.8;
  const double rewards[] = {0.3, 1.0, 0.0, 2.0, 0.5};  // on leaving state s
  GvfLearner l(make_question("q", "constant", 5), params(1.0, 1.0), 6u, 1);
  l.begin_batch();
  for (std::uint32_t s = 0; s < 5; ++s) {
    const auto x = fv({s + 1}, 6);
    if (s < 4) {
      l.update(x, rewards[s], fv({s + 2}, 6));
    } else {
      l.update_terminal(x, rewards[s]);
    }
  }
  l.end_batch();
  for (std::uint32_t s = 0; s < 5; ++s) {
    double g = 0.0, d = 1.0;
    for (std::uint32_t k = s; k < 5; ++k, d *= gamma) g += d * rewards[k];
    CHECK(std::abs(l.weights()[s + 1] - g) < 1e-6);
  }
}

TEST_CASE("constant cumulant approaches the geometric limit") {
  GvfLearner l(make_question("q", "constant", 10), params(0.1, 0.9), 3u, 2);
  const auto x = fv({0, 1}, 3);
  for (int t = 0; t < 2000; ++t) l.update(x, 1.0, x);
  CHECK(l.predict(x) == doctest::Approx(10.0).epsilon(0.01));
}

TEST_CASE("divergence halts without touching weights") {
  GvfLearner l(make_question("bad", "constant", 10), params(0.1, 0.9), 4u, 1);
  l.weights()[1] = 2.0;
  try {
    l.update(fv({1}, 4), std::numeric_limits<double>::infinity(), fv({2}, 4));
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.question_id() == "bad");
  }
  CHECK(l.weights()[1] == 2.0);
  CHECK(l.trace().size() == 0);
}

TEST_CASE("updates are deterministic") {
  auto run = [] {
    GvfLearner l(make_question("q", "constant", 10), params(0.1, 0.9), 32u, 3);
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<std::uint32_t> pick(1, 31);
    FeatureVector x = fv({0, 4, 9}, 32);
    for (int t = 0; t < 500; ++t) {
      std::vector<std::uint32_t> a{0, pick(rng)};
      if (a[1] == 0) a.pop_back();
      const FeatureVector next = fv(a, 32);
      l.update(x, static_cast<double>(t % 3), next);
      x = next;
    }
    return std::vector<double>(l.weights().begin(), l.weights().end());
  };
  CHECK(run() == run());
}

TEST_CASE("normalize prediction") {
  CHECK(normalize_prediction(10, 0.9) == doctest::Approx(1.0));
  CHECK(normalize_prediction(0, 0.9) == 0.0);
  CHECK(normalize_prediction(5, 0.9) == doctest::Approx(0.5));
}

TEST_CASE("verification horizon") {
  CHECK(verification_horizon(0.9) == 44);
  CHECK(std::pow(0.9, 44) < 0.01);
  CHECK(std::pow(0.9, 43) >= 0.01);
  CHECK(verification_horizon(0.0) == 1);
  CHECK(verification_horizon(0.5) == 7);
  CHECK_THROWS_AS(verification_horizon(1.0), ConfigError);
}

TEST_CASE("return verifier") {
  SUBCASE("all zero cumulants") {
    ReturnVerifier v(0.9);
    int matured = 0;
    for (int t = 0; t < 200; ++t) {
      if (auto m = v.observe(t, 0.3, 0.0)) {
        CHECK(m->truncated_return == 0.0);
        ++matured;
      }
    }
    CHECK(matured == 200 - 44);
  }
  SUBCASE("constant cumulant") {
    ReturnVerifier v(0.9);
    std::optional<MaturedReturn> m;
    for (int t = 0; t <= 44; ++t) m = v.observe(t, 1.0, 1.0);
    REQUIRE(m);
    CHECK(m->step == 0);
    CHECK(m->truncated_return == doctest::Approx((1 - std::pow(0.9, 44)) / 0.1));
    CHECK(m->truncated_return == doctest::Approx(9.903).epsilon(1e-3));
  }
  SUBCASE("single pulse one tick later") {
    ReturnVerifier v(0.9);
    std::optional<MaturedReturn> first;
    for (int t = 0; t <= 44; ++t) {
      auto m = v.observe(t, 0.25, t == 1 ? 1.0 : 0.0);
      if (m && !first) first = m;
    }
    REQUIRE(first);
    CHECK(first->step == 0);
    CHECK(first->truncated_return == 1.0);
    CHECK(first->prediction == 0.25);
  }
  SUBCASE("bounded by the partial geometric sum") {
    ReturnVerifier v(0.8);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-2, 2);
    const double bound = 2 * (1 - std::pow(0.8, v.horizon())) / 0.2;
    for (int t = 0; t < 1000; ++t) {
      if (auto m = v.observe(t, 0, u(rng))) CHECK(std::abs(m->truncated_return) <= bound + 1e-12);
    }
  }
  SUBCASE("end of session") {
    ReturnVerifier v(0.9);
    for (int t = 0; t < 10; ++t) v.observe(t, 0, 1.0);
    ReturnVerifier w = v;
    CHECK(v.finish(false).empty());
    const auto padded = w.finish(true);
    CHECK(padded.size() == 10);
    CHECK(padded[0].truncated_return == doctest::Approx((1 - std::pow(0.9, 9)) / 0.1));
  }
  SUBCASE("gamma zero") {
    ReturnVerifier v(0.0);
    CHECK(!v.observe(0, 0.5, 3.0));
    auto m = v.observe(1, 0.7, 2.0);
    REQUIRE(m);
    CHECK(m->truncated_return == 2.0);
    CHECK(m->prediction == 0.5);
  }
}
