#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "gjam/error.hpp"
#include "gjam/rng.hpp"
#include "gjam/uncert.hpp"

using namespace gjam;
using Catch::Matchers::WithinAbs;

namespace {

EnsemblePrediction ens(int m, int c, std::vector<double> probs) { return {m, c, std::move(probs), {}}; }

EnsemblePrediction dirichlet(std::mt19937_64& g, int m, int c) {
  std::uniform_real_distribution<double> alpha_dist(0.05, 5.0);
  const double alpha = alpha_dist(g);
  std::gamma_distribution<double> gamma(alpha, 1.0);
  EnsemblePrediction e{m, c, std::vector<double>(static_cast<std::size_t>(m) * c), {}};
  for (int i = 0; i < m; ++i) {
    double s = 0;
    for (int k = 0; k < c; ++k) s += e.probs[i * c + k] = gamma(g) + 1e-300;
    for (int k = 0; k < c; ++k) e.probs[i * c + k] /= s;
  }
  return e;
}

// diag(p_bar) - p_bar p_bar^T computed directly.
std::vector<double> total_covariance(const EnsemblePrediction& e) {
  std::vector<double> pbar(e.c, 0.0);
  for (int i = 0; i < e.m; ++i)
    for (int k = 0; k < e.c; ++k) pbar[k] += e.p(i, k) / e.m;
  std::vector<double> out(static_cast<std::size_t>(e.c) * e.c);
  for (int a = 0; a < e.c; ++a)
    for (int b = 0; b < e.c; ++b) out[a * e.c + b] = (a == b ? pbar[a] : 0.0) - pbar[a] * pbar[b];
  return out;
}

}  // namespace

TEST_CASE("two opposite members are purely epistemic", "[uncert]") {
  const UncertaintyReport r = decompose(ens(2, 2, {1, 0, 0, 1}));
  for (double v : r.aleatoric) CHECK(v == 0.0);
  const std::vector<double> expect{0.25, -0.25, -0.25, 0.25};
  for (int i = 0; i < 4; ++i) CHECK_THAT(r.epistemic[i], WithinAbs(expect[i], 1e-15));
  CHECK(r.mean_probs == std::vector<double>{0.5, 0.5});
}

TEST_CASE("identical members are purely aleatoric", "[uncert]") {
  const UncertaintyReport r = decompose(ens(3, 2, {0.5, 0.5, 0.5, 0.5, 0.5, 0.5}));
  for (double v : r.epistemic) CHECK(v == 0.0);
  const std::vector<double> expect{0.25, -0.25, -0.25, 0.25};
  for (int i = 0; i < 4; ++i) CHECK_THAT(r.aleatoric[i], WithinAbs(expect[i], 1e-15));
}

TEST_CASE("decomposition identity on Dirichlet ensembles", "[uncert][property]") {
  std::mt19937_64 g(1);
  for (int trial = 0; trial < 2000; ++trial) {
    const int m = 1 + static_cast<int>(g() % 16), c = 2 + static_cast<int>(g() % 9);
    const EnsemblePrediction e = dirichlet(g, m, c);
    const UncertaintyReport r = decompose(e);
    const std::vector<double> tot = total_covariance(e);
    for (int a = 0; a < c; ++a) {
      for (int b = 0; b < c; ++b) {
        const std::size_t i = a * c + b;
        REQUIRE(std::abs(r.aleatoric[i] + r.epistemic[i] - tot[i]) <= 1e-12);
        REQUIRE(r.aleatoric[i] == r.aleatoric[b * c + a]);
        REQUIRE(r.epistemic[i] == r.epistemic[b * c + a]);
      }
      REQUIRE(r.per_class_aleatoric[a] >= 0.0);
      REQUIRE(r.per_class_epistemic[a] >= 0.0);
      REQUIRE(r.per_class_aleatoric[a] <= 0.25);
      REQUIRE(r.per_class_epistemic[a] <= 0.25);
      REQUIRE(r.per_class_aleatoric[a] == r.aleatoric[a * c + a]);
    }
    if (m == 1)
      for (double v : r.epistemic) REQUIRE(v == 0.0);
  }
}

TEST_CASE("epistemic part vanishes exactly when members agree", "[uncert][property]") {
  std::mt19937_64 g(2);
  for (int trial = 0; trial < 200; ++trial) {
    EnsemblePrediction e = dirichlet(g, 4, 5);
    for (int i = 1; i < 4; ++i) std::copy_n(e.probs.begin(), 5, e.probs.begin() + i * 5);
    for (double v : decompose(e).epistemic) REQUIRE(std::abs(v) <= 1e-12);
    // Pull member 1 halfway to uniform; rows stay on the simplex.
    for (int k = 5; k < 10; ++k) e.probs[k] = 0.5 * e.probs[k] + 0.1;
    double max_abs = 0;
    for (double v : decompose(e).epistemic) max_abs = std::max(max_abs, std::abs(v));
    REQUIRE(max_abs > 1e-12);
  }
}

TEST_CASE("class permutation permutes both matrices", "[uncert][property]") {
  std::mt19937_64 g(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 3, c = 6;
    const EnsemblePrediction e = dirichlet(g, m, c);
    std::vector<int> perm(c);
    for (int k = 0; k < c; ++k) perm[k] = k;
    std::shuffle(perm.begin(), perm.end(), g);
    EnsemblePrediction q = e;
    for (int i = 0; i < m; ++i)
      for (int k = 0; k < c; ++k) q.probs[i * c + k] = e.p(i, perm[k]);
    const UncertaintyReport a = decompose(e), b = decompose(q);
    for (int x = 0; x < c; ++x)
      for (int y = 0; y < c; ++y) {
        REQUIRE_THAT(b.aleatoric[x * c + y], WithinAbs(a.aleatoric[perm[x] * c + perm[y]], 1e-15));
        REQUIRE_THAT(b.epistemic[x * c + y], WithinAbs(a.epistemic[perm[x] * c + perm[y]], 1e-15));
      }
  }
}

TEST_CASE("mean prediction and lowest-index ties", "[uncert]") {
  const UncertaintyReport r = decompose(ens(2, 2, {0.6, 0.4, 0.2, 0.8}));
  CHECK_THAT(r.mean_probs[0], WithinAbs(0.4, 1e-15));
  CHECK_THAT(r.mean_probs[1], WithinAbs(0.6, 1e-15));
  CHECK(argmax_lowest(r.mean_probs) == 1);
  const UncertaintyReport swapped = decompose(ens(2, 2, {0.2, 0.8, 0.6, 0.4}));
  CHECK(swapped.mean_probs == r.mean_probs);
  const std::vector<double> tie{0.3, 0.35, 0.35};
  CHECK(argmax_lowest(tie) == 1);
}

TEST_CASE("invalid ensembles are rejected", "[uncert]") {
  CHECK_THROWS_MATCHES(decompose(ens(0, 2, {})), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::EmptyEnsemble;
                       }));
  CHECK_THROWS_AS(decompose(ens(1, 2, {0.7, 0.7})), Error);
  CHECK_THROWS_AS(decompose(ens(1, 2, {1.2, -0.2})), Error);
  CHECK_THROWS_AS(decompose(ens(2, 2, {0.5, 0.5})), Error);
}

TEST_CASE("confusion-conditioned uncertainty averages per cell", "[uncert]") {
  const std::vector<int> truths{0, 0, 1, 1, 1}, preds{0, 1, 1, 1, 0};
  const std::vector<double> value{1.0, 2.0, 3.0, 5.0, 7.0};
  const std::vector<double> m = confusion_uncertainty(truths, preds, value, 3);
  REQUIRE(m.size() == 9);
  CHECK(m[0 * 3 + 0] == 1.0);
  CHECK(m[0 * 3 + 1] == 2.0);
  CHECK(m[1 * 3 + 1] == 4.0);
  CHECK(m[1 * 3 + 0] == 7.0);
  CHECK(m[2 * 3 + 2] == 0.0);
}

TEST_CASE("uncertainty CSV has one row per sample", "[uncert]") {
  const auto path = std::filesystem::temp_directory_path() / "gjam_test_uncert.csv";
  std::vector<UncertaintyReport> reports{decompose(ens(2, 2, {1, 0, 0, 1})), decompose(ens(1, 2, {0.3, 0.7}))};
  write_uncertainty_csv(path, {0, 1}, {0, 1}, reports);
  std::ifstream in(path);
  std::string header, line;
  std::getline(in, header);
  CHECK(header.find("aleatoric") != std::string::npos);
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 2);
  std::filesystem::remove(path);
}
