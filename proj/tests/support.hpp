#pragma once

// Shared fixtures for the unit suite: frozen reference values computed with
// independent high-precision tooling, slow-but-obvious reference
// implementations to diff the fast paths against, and a scratch-directory
// guard for tests that touch the filesystem.

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "lcnr/tensor.hpp"

namespace oracle {

// Cantilever eigenvalues, roots of cos(l)*cosh(l) = -1, 20 significant
// digits from arbitrary-precision root finding.
inline constexpr double kLambda[8] = {
    1.8751040687119611664, 4.6940911329741745764, 7.8547574382376125649,
    10.995540734875466991, 14.137168391046470581, 17.278759532088236334,
    20.420352251041250994, 23.561944901806443502};

// Natural frequencies (Hz) of the reference beam, modes 1 and 2.
inline constexpr double kFreq1 = 4.07690352734;
inline constexpr double kFreq2 = 25.5495182822;

// Normalized curvature of mode 1 at selected positions.
inline constexpr double kCurv1Mid = 0.339523112865;     // x/L = 0.5
inline constexpr double kCurv1Near = 0.922920680495;    // x/L = 0.056

// Monotone-cubic severity interpolation through the reference anchors,
// frozen from an independent PCHIP implementation.
inline constexpr double kSeverity010 = 0.0011145694405496356;   // a/H = 0.10
inline constexpr double kSeverity04o3 = 0.0017863267443551235;  // a/H = 0.4/3
inline constexpr double kSeverity05o3 = 0.0025431198523607735;  // a/H = 0.5/3
inline constexpr double kSeverity004 = 0.0002443401767807065;   // a/H = 0.04
inline constexpr double kSeverity032 = 0.00922648025455377;     // a/H = 0.32
inline constexpr double kSeverity045 = 0.020837532302180044;    // a/H = 0.45
inline constexpr double kSeverity055 = 0.03256125575908414;     // a/H = 0.55

// Mode-1 imperfect-clamping shift at x = 56 mm with gamma1 = 0.0021409 and
// gamma2 = 0.0033459.
inline constexpr double kImperfectMode1At56 = 0.00499087934274;

// Closed-form scalars used by the logic tests.
inline constexpr double kOneMinusInvSqrt2 = 0.2928932188134524;  // 1 - sqrt(1/2)
inline constexpr double kExpNeg1 = 0.36787944117144233;          // exp(-1)

}  // namespace oracle

namespace support {

// Creates a fresh directory under the system temp root and removes it on
// scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& label) {
    static std::atomic<unsigned> counter{0};
    const auto base = std::filesystem::temp_directory_path();
    path_ = base / ("lcnr-test-" + label + "-" + std::to_string(::getpid()) + "-" +
                    std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

// Reference matrix product, row-major [n,k] x [k,m].
inline std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b,
                                        std::size_t n, std::size_t k, std::size_t m) {
  std::vector<double> out(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * m + j];
      out[i * m + j] = acc;
    }
  return out;
}

// Reference 1-D cross-correlation for a single batch element and output
// channel, explicit zero padding.
inline double naive_conv_at(const std::vector<double>& x, std::size_t channels, std::size_t width,
                            const std::vector<double>& w, std::size_t kernel, std::size_t out_pos,
                            std::size_t stride, long pad_left) {
  double acc = 0.0;
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t t = 0; t < kernel; ++t) {
      const long src = static_cast<long>(out_pos * stride + t) - pad_left;
      if (src < 0 || src >= static_cast<long>(width)) continue;
      acc += x[c * width + static_cast<std::size_t>(src)] * w[c * kernel + t];
    }
  return acc;
}

// Central-difference derivative of a scalar graph output with respect to one
// entry of one input tensor. Rebuilds the graph from scratch per evaluation.
template <typename BuildFn>
double finite_difference(BuildFn&& build, std::vector<lcnr::ad::Tensor>& inputs, std::size_t which,
                         std::size_t index, double h = 1e-6) {
  const double saved = inputs[which].data[index];
  inputs[which].data[index] = saved + h;
  const double up = build(inputs);
  inputs[which].data[index] = saved - h;
  const double down = build(inputs);
  inputs[which].data[index] = saved;
  return (up - down) / (2.0 * h);
}

// Deterministic uniform doubles for test data, independent of the library's
// own generator.
class TestRng {
 public:
  explicit TestRng(std::uint64_t seed) : gen_(seed) {}
  double uniform(double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(gen_);
  }
  std::vector<double> vec(std::size_t n, double lo, double hi) {
    std::vector<double> out(n);
    for (auto& v : out) v = uniform(lo, hi);
    return out;
  }
  long integer(long lo, long hi) {
    std::uniform_int_distribution<long> d(lo, hi);
    return d(gen_);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace support
