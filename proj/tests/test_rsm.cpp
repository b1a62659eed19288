#include <cmath>

#include "doctest.h"
#include "support/brute_force.hpp"
#include "support/fixtures.hpp"
#include "tempora/errors.hpp"
#include "tempora/exact.hpp"
#include "tempora/rsm.hpp"

using namespace tempora;
using fixtures::doc;

TEST_SUITE("rsm") {

TEST_CASE("hidden activation") {
  const RsmParams zero = RsmParams::zeros(4, 3);
  const Eigen::VectorXd p0 = hidden_activation(zero, doc({{1, 3}}));
  for (Eigen::Index j = 0; j < 3; ++j) CHECK(p0[j] == 0.5);

  RsmParams p = RsmParams::zeros(3, 2);
  p.weights(0, 1) = std::log(3.0);
  CHECK(hidden_activation(p, doc({{0, 1}}))[1] == doctest::Approx(0.75).epsilon(1e-14));

  BiasOverride off{Eigen::VectorXd::Zero(3), Eigen::VectorXd::Constant(2, -1e9)};
  const Eigen::VectorXd sat = hidden_activation(p, doc({{0, 1}}), &off);
  CHECK(sat.maxCoeff() < 1e-300);

  CHECK_THROWS_AS(hidden_activation(p, doc({{5, 1}})), DimensionError);
}

TEST_CASE("hidden bias is scaled by document length") {
  RsmParams p = RsmParams::zeros(2, 1);
  p.hidden_bias[0] = 0.3;
  const double one = hidden_activation(p, doc({{0, 1}}))[0];
  const double two = hidden_activation(p, doc({{0, 2}}))[0];
  CHECK(one == doctest::Approx(1.0 / (1.0 + std::exp(-0.3))));
  CHECK(two == doctest::Approx(1.0 / (1.0 + std::exp(-0.6))));
}

TEST_CASE("visible distribution") {
  const RsmParams zero = RsmParams::zeros(5, 2);
  const Eigen::VectorXd u = visible_distribution(zero, Eigen::VectorXd::Ones(2));
  for (Eigen::Index k = 0; k < 5; ++k) CHECK(u[k] == doctest::Approx(0.2).epsilon(1e-15));

  RsmParams p = RsmParams::zeros(2, 1);
  p.visible_bias[0] = std::log(2.0);
  const Eigen::VectorXd q = visible_distribution(p, Eigen::VectorXd::Zero(1));
  CHECK(q[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(q[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  std::mt19937_64 rng(4);
  RsmParams r = RsmParams::random(6, 3, rng, 2.0);
  const Eigen::VectorXd h = (Eigen::VectorXd(3) << 1, 0, 1).finished();
  const Eigen::VectorXd base = visible_distribution(r, h);
  CHECK(std::abs(base.sum() - 1.0) < 1e-12);
  r.visible_bias.array() += 17.0;
  CHECK((visible_distribution(r, h) - base).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("sampling") {
  RsmParams point = RsmParams::zeros(4, 1);
  point.visible_bias[2] = 1e9;
  std::mt19937_64 rng(1);
  const Document d = sample_document(point, Eigen::VectorXd::Zero(1), 7, nullptr, rng);
  CHECK(d == doc({{2, 7}}));
  CHECK_THROWS_AS(sample_document(point, Eigen::VectorXd::Zero(1), 0, nullptr, rng), InputError);

  const RsmParams uniform = RsmParams::zeros(2, 1);
  const std::uint64_t n = 100000;
  const Document big = sample_document(uniform, Eigen::VectorXd::Zero(1), n, nullptr, rng);
  const double sigma = std::sqrt(n * 0.25);
  CHECK(std::abs(big.count(0) - n / 2.0) < 5 * sigma);

  std::mt19937_64 a(99), b(99);
  CHECK(sample_document(uniform, Eigen::VectorXd::Zero(1), 50, nullptr, a) ==
        sample_document(uniform, Eigen::VectorXd::Zero(1), 50, nullptr, b));
}

TEST_CASE("free energy") {
  const RsmParams zero = RsmParams::zeros(3, 4);
  CHECK(free_energy(zero, doc({{0, 2}, {1, 1}})) == doctest::Approx(-4 * std::log(2.0)).epsilon(1e-14));

  RsmParams c = RsmParams::zeros(3, 2);
  c.hidden_bias.setConstant(0.7);
  const double D = 3;
  CHECK(free_energy(c, doc({{0, 3}})) == doctest::Approx(-2 * std::log1p(std::exp(D * 0.7))).epsilon(1e-14));

  // Overflow-safe for huge arguments: softplus(x) ~ x.
  RsmParams huge = RsmParams::zeros(2, 1);
  huge.hidden_bias[0] = 1e6;
  CHECK(free_energy(huge, doc({{0, 1}})) == doctest::Approx(-1e6));

  // Matches -log sum_h exp(-E) written from the energy.
  std::mt19937_64 rng(5);
  const RsmParams r = RsmParams::random(3, 3, rng, 0.8);
  const Document d = doc({{0, 1}, {2, 2}});
  CHECK(-free_energy(r, d) == doctest::Approx(brute::log_unnormalized(r, brute::words_of(d), nullptr)).epsilon(1e-12));
}

TEST_CASE("CD with negatives equal to the data gives zero gradient") {
  std::mt19937_64 rng(2);
  const RsmParams p = RsmParams::random(5, 3, rng, 0.5);
  const std::vector<Document> docs = {doc({{0, 2}, {4, 1}}), doc({{3, 5}})};
  const RsmGradient g = cd_gradient_from_negatives(p, docs, docs, nullptr);
  CHECK(g.weights.cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.visible_bias.cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.hidden_bias.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("CD visible-bias gradient of one document is bounded by its length") {
  std::mt19937_64 rng(8);
  const RsmParams p = RsmParams::random(6, 4, rng, 1.0);
  const std::vector<Document> one = {doc({{1, 3}, {2, 1}})};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const RsmGradient g = cd_gradient(p, one, nullptr, {3, true, 1}, seed);
    CHECK(g.visible_bias.cwiseAbs().maxCoeff() <= 4.0);
    CHECK(g.visible_bias.sum() == doctest::Approx(0.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(cd_gradient(p, one, nullptr, {0, true, 1}, 0), InputError);
}

TEST_CASE("CD result does not depend on thread count") {
  std::mt19937_64 rng(3);
  const RsmParams p = RsmParams::random(7, 4, rng, 0.3);
  std::vector<Document> docs;
  for (int n = 0; n < 53; ++n) docs.push_back(doc({{static_cast<TermId>(n % 7), 1u + n % 4}, {static_cast<TermId>((n * 3) % 7), 2}}));
  CdStats s1, s4;
  const RsmGradient one = cd_gradient(p, docs, nullptr, {5, true, 1}, 42, &s1);
  const RsmGradient four = cd_gradient(p, docs, nullptr, {5, true, 4}, 42, &s4);
  CHECK(one.weights == four.weights);
  CHECK(one.visible_bias == four.visible_bias);
  CHECK(one.hidden_bias == four.hidden_bias);
  CHECK(s1.reconstruction_l1 == s4.reconstruction_l1);
}

TEST_CASE("long CD chains agree with the exact gradient") {
  std::mt19937_64 rng(11);
  const RsmParams p = RsmParams::random(3, 2, rng, 0.7);
  const std::vector<Document> one = {doc({{0, 1}, {2, 1}})};
  const RsmGradient exact = exact_rsm_gradient(p, one);
  const int chains = 4000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(5), sum_sq = Eigen::VectorXd::Zero(5);
  for (int c = 0; c < chains; ++c) {
    const RsmGradient g = cd_gradient(p, one, nullptr, {15, true, 1}, static_cast<std::uint64_t>(c));
    Eigen::VectorXd v(5);
    v << g.visible_bias, g.hidden_bias;
    sum += v;
    sum_sq += v.cwiseProduct(v);
  }
  Eigen::VectorXd truth(5);
  truth << exact.visible_bias, exact.hidden_bias;
  const Eigen::VectorXd mean = sum / chains;
  const Eigen::VectorXd se = ((sum_sq / chains - mean.cwiseProduct(mean)) / chains).cwiseSqrt();
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(std::abs(mean[i] - truth[i]) <= 4 * se[i] + 1e-12);
}

}
