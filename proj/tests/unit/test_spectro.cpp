#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "gjam/error.hpp"
#include "gjam/fft.hpp"
#include "gjam/rng.hpp"
#include "gjam/spectro.hpp"

using namespace gjam;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<cplx> random_signal(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<cplx> v(n);
  for (cplx& x : v) x = {rng.normal(), rng.normal()};
  return v;
}

// O(n^2) DFT with exact integer phase reduction, accumulated in long double.
std::vector<cplx> naive_dft(const std::vector<cplx>& x, bool inverse = false) {
  const std::size_t n = x.size();
  std::vector<cplx> out(n);
  const long double pi = 3.141592653589793238462643383279502884L;
  for (std::size_t k = 0; k < n; ++k) {
    long double re = 0, im = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const long double ang = (inverse ? 2 : -2) * pi * static_cast<long double>((k * t) % n) / n;
      const long double c = std::cos(ang), s = std::sin(ang);
      re += x[t].real() * c - x[t].imag() * s;
      im += x[t].real() * s + x[t].imag() * c;
    }
    out[k] = inverse ? cplx(static_cast<double>(re / n), static_cast<double>(im / n))
                     : cplx(static_cast<double>(re), static_cast<double>(im));
  }
  return out;
}

double max_rel_error(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) num = std::max(num, std::abs(a[i] - b[i])), den = std::max(den, std::abs(b[i]));
  return num / den;
}

}  // namespace

TEST_CASE("FFT matches the naive DFT", "[spectro][fft]") {
  for (std::size_t n : {2u, 8u, 1024u}) {
    const std::vector<cplx> x = random_signal(n, n);
    std::vector<cplx> y = x;
    FftPlan plan(n);
    plan.forward(y);
    CHECK(max_rel_error(y, naive_dft(x)) <= 1e-9);
    plan.inverse(y);
    CHECK(max_rel_error(y, x) <= 1e-9);
  }
  CHECK_THROWS_AS(FftPlan(12), Error);
}

TEST_CASE("Parseval holds for the 1024-point transform", "[spectro][fft]") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::vector<cplx> x = random_signal(1024, 100 + seed);
    double time = 0;
    for (cplx v : x) time += std::norm(v);
    fft_plan_1024().forward(x);
    double freq = 0;
    for (cplx v : x) freq += std::norm(v);
    CHECK_THAT(freq, WithinRel(1024.0 * time, 1e-9));
  }
}

TEST_CASE("tone on an exact bin lands on its shifted row", "[spectro]") {
  std::vector<cplx> x(1024);
  for (std::size_t n = 0; n < 1024; ++n) x[n] = std::polar(1.0, 2 * std::numbers::pi * static_cast<double>((100 * n) % 1024) / 1024.0);
  const DbMatrix m = stft_db(x);
  REQUIRE(m.cols == 1);
  const std::vector<cplx> ref = naive_dft(x);
  int best = 0;
  for (int r = 1; r < 1024; ++r)
    if (m.at(r, 0) > m.at(best, 0)) best = r;
  CHECK(best == 512 + 100);
  CHECK_THAT(m.at(best, 0), WithinAbs(20 * std::log10(std::abs(ref[100]) + 1e-12), 1e-9));
  CHECK_THAT(m.at(best, 0), WithinAbs(20 * std::log10(1024.0), 1e-9));
  // Every other row sits within rounding of the log floor (|X| < 1e-10).
  for (int r = 0; r < 1024; ++r)
    if (r != best) REQUIRE(m.at(r, 0) < -200.0);
}

TEST_CASE("stft_db matches the naive DFT cell by cell", "[spectro]") {
  const std::vector<cplx> x = random_signal(3 * 1024 + 100, 7);
  const DbMatrix m = stft_db(x);
  REQUIRE(m.cols == 3);
  for (int t = 0; t < 3; ++t) {
    const std::vector<cplx> ref = naive_dft(std::vector<cplx>(x.begin() + t * 1024, x.begin() + (t + 1) * 1024));
    for (int k = 0; k < 1024; ++k) {
      const int row = (k + 512) % 1024;
      REQUIRE_THAT(m.at(row, t), WithinAbs(20 * std::log10(std::abs(ref[k]) + 1e-12), 1e-9));
    }
  }
}

TEST_CASE("all-zero input sits exactly on the log floor", "[spectro]") {
  const DbMatrix m = stft_db(std::vector<cplx>(2048, cplx{0, 0}));
  for (double v : m.db) REQUIRE(v == 20 * std::log10(1e-12));
  CHECK(m.db.front() == -240.0);
}

TEST_CASE("min-max normalization constants", "[spectro]") {
  CHECK(normalize_db(-182.77) == 0.0);
  CHECK(normalize_db(-17.12) == 1.0);
  CHECK_THAT(normalize_db(-99.945), WithinAbs(0.5, 1e-12));
  CHECK(normalize_db(-300.0) == 0.0);
  CHECK(normalize_db(10.0) == 1.0);
}

TEST_CASE("snapshot framing, prefixes and truncation", "[spectro]") {
  const IQBuffer x(random_signal(34 * 1024, 9), kDefaultSampleRateHz);
  const Spectrogram full = frame_snapshot(x, 34);
  REQUIRE(full.n_t == 34);
  REQUIRE(full.cells.size() == 1024u * 34);
  for (float v : full.cells) REQUIRE((v >= 0.0f && v <= 1.0f));
  for (int n_t : {1, 5, 10, 33}) {
    const Spectrogram part = frame_snapshot(x, n_t);
    CHECK(truncate(full, n_t) == part);
    for (int f = 0; f < 1024; ++f)
      for (int t = 0; t < n_t; ++t) REQUIRE(part.at(f, t) == full.at(f, t));
  }
  CHECK_THROWS_MATCHES(frame_snapshot(IQBuffer(random_signal(1000, 1), 1e8), 1), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == ErrorCode::TooShort; }));
  CHECK_THROWS_AS(frame_snapshot(x, 35), Error);
  CHECK_THROWS_AS(truncate(full, 0), Error);
}

TEST_CASE("editing one window changes only its column", "[spectro][property]") {
  std::vector<cplx> x = random_signal(6 * 1024, 10);
  const DbMatrix a = stft_db(x);
  for (std::size_t i = 2 * 1024 + 17; i < 2 * 1024 + 40; ++i) x[i] *= -3.0;
  const DbMatrix b = stft_db(x);
  for (int t = 0; t < 6; ++t) {
    bool changed = false;
    for (int r = 0; r < 1024; ++r) changed = changed || a.at(r, t) != b.at(r, t);
    CHECK(changed == (t == 2));
  }
}

TEST_CASE("receiver gain shifts every cell by the same number of dB", "[spectro]") {
  const IQBuffer x(random_signal(2 * 1024, 11), kDefaultSampleRateHz);
  const Spectrogram s = render_snapshot(x, 2, -100.0);
  const DbMatrix raw = stft_db(x);
  for (int f = 0; f < 1024; ++f)
    for (int t = 0; t < 2; ++t)
      REQUIRE_THAT(s.at(f, t), WithinAbs(static_cast<float>(normalize_db(raw.at(f, t) - 100.0)), 1e-6));
}
