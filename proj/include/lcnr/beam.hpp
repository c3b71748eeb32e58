#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

#include "lcnr/csv.hpp"
#include "lcnr/errors.hpp"

namespace lcnr::beam {

// Analytical Euler-Bernoulli cantilever: eigenvalues of the clamped-free
// characteristic equation, natural frequencies, normalized squared modal
// curvatures, and an anchor-interpolated crack-severity curve.

inline constexpr int kMaxModes = 32;
inline constexpr double kPi = 3.141592653589793238462643383279502884;

struct BeamSpec {
  double elastic_modulus;  // Pa
  double density;          // kg/m^3
  double length;           // m
  double width;            // m
  double thickness;        // m

  double second_moment() const { return width * thickness * thickness * thickness / 12.0; }
  double cross_section_area() const { return width * thickness; }

  void validate() const {
    if (!(elastic_modulus > 0 && density > 0 && length > 0 && width > 0 && thickness > 0))
      throw ValidationError("BeamSpec: all fields must be strictly positive");
    if (!(thickness < width && width < length))
      throw ValidationError("BeamSpec: expected thickness < width < length");
  }

  // The steel cantilever used throughout: E=2e11 Pa, rho=7850 kg/m^3,
  // L=1 m, B=0.05 m, H=0.005 m.
  static BeamSpec reference() { return BeamSpec{2.0e11, 7850.0, 1.0, 0.05, 0.005}; }
};

namespace detail {

// cos(l)*cosh(l) + 1 = 0, evaluated as cos(l) + sech(l). Dividing by cosh
// keeps the residual O(eps) at the root; the raw product form loses
// ~cosh(l)*eps absolutely, which already exceeds any useful tolerance at
// mode 8.
inline double characteristic(double lambda) { return std::cos(lambda) + 1.0 / std::cosh(lambda); }

}  // namespace detail

// Residual of the characteristic equation in its cosh-normalized form.
inline double characteristic_residual(double lambda) { return detail::characteristic(lambda); }

// Roots of the clamped-free characteristic equation, bracketed around the
// odd multiples of pi/2. Bisection, tolerance 1e-13, deterministic.
inline std::vector<double> solve_eigenvalues(int n) {
  if (n < 1 || n > kMaxModes) throw DomainError("solve_eigenvalues: mode count must be in 1..32, got " + std::to_string(n));
  std::vector<double> roots;
  roots.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) {
    const double center = (2.0 * i - 1.0) * kPi / 2.0;
    double lo = center - 1.0;
    double hi = center + 1.0;
    double flo = detail::characteristic(lo);
    double fhi = detail::characteristic(hi);
    if (flo == 0.0) {
      roots.push_back(lo);
      continue;
    }
    if (fhi == 0.0) {
      roots.push_back(hi);
      continue;
    }
    if ((flo > 0) == (fhi > 0)) throw ContractError("solve_eigenvalues: root not bracketed for mode " + std::to_string(i));
    for (int iter = 0; iter < 200 && hi - lo > 1e-13; ++iter) {
      const double mid = 0.5 * (lo + hi);
      const double fm = detail::characteristic(mid);
      if (fm == 0.0) {
        lo = hi = mid;
        break;
      }
      if ((fm > 0) == (flo > 0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    roots.push_back(0.5 * (lo + hi));
  }
  return roots;
}

// One vibration mode of a given beam: eigenvalue, shape coefficient, the
// undamaged natural frequency, and precomputed terms for the stable
// curvature evaluation.
struct ModeBasis {
  int mode_index;
  double eigenvalue;          // lambda_i
  double shape_coefficient;   // sigma_i = (cosh l + cos l)/(sinh l + sin l)
  double undamaged_frequency; // Hz

  // (1 - sigma) computed without the cosh-scale cancellation:
  // sinh l + sin l - cosh l - cos l = sin l - cos l - exp(-l).
  double one_minus_sigma;
  double one_plus_sigma;
};

// f_i = (lambda_i^2 / 2pi) * sqrt(E I / (rho A L^4))
inline double natural_frequency(const BeamSpec& spec, int mode_index) {
  spec.validate();
  if (mode_index < 1 || mode_index > kMaxModes)
    throw DomainError("natural_frequency: mode index must be in 1..32, got " + std::to_string(mode_index));
  const double lambda = solve_eigenvalues(mode_index).back();
  const double stiffness = spec.elastic_modulus * spec.second_moment();
  const double inertia = spec.density * spec.cross_section_area() * std::pow(spec.length, 4);
  return lambda * lambda / (2.0 * kPi) * std::sqrt(stiffness / inertia);
}

inline std::vector<ModeBasis> mode_basis(const BeamSpec& spec, int n_modes) {
  spec.validate();
  const auto lambdas = solve_eigenvalues(n_modes);
  const double stiffness = spec.elastic_modulus * spec.second_moment();
  const double inertia = spec.density * spec.cross_section_area() * std::pow(spec.length, 4);
  const double freq_scale = std::sqrt(stiffness / inertia) / (2.0 * kPi);
  std::vector<ModeBasis> modes;
  modes.reserve(lambdas.size());
  for (int i = 0; i < n_modes; ++i) {
    const double l = lambdas[static_cast<std::size_t>(i)];
    const double denom = std::sinh(l) + std::sin(l);
    const double sigma = (std::cosh(l) + std::cos(l)) / denom;
    ModeBasis m;
    m.mode_index = i + 1;
    m.eigenvalue = l;
    m.shape_coefficient = sigma;
    m.undamaged_frequency = l * l * freq_scale;
    m.one_minus_sigma = (std::sin(l) - std::cos(l) - std::exp(-l)) / denom;
    m.one_plus_sigma = 1.0 + sigma;
    modes.push_back(m);
  }
  return modes;
}

// Mode shape phi_i(x) = cosh(u) - cos(u) - sigma (sinh(u) - sin(u)),
// u = lambda_i x / L. Exposed mainly for verification.
inline double mode_shape(const ModeBasis& mode, double position_ratio) {
  const double u = mode.eigenvalue * position_ratio;
  return std::cosh(u) - std::cos(u) - mode.shape_coefficient * (std::sinh(u) - std::sin(u));
}

// Normalized second derivative of the mode shape, phi''_i(x) / phi''_i(0).
// Written in exponentials so every term stays O(1); the naive
// cosh/sinh form cancels catastrophically near the free end for the
// higher modes.
inline double normalized_curvature(const ModeBasis& mode, double position_ratio) {
  if (position_ratio < 0.0 || position_ratio > 1.0)
    throw DomainError("normalized_curvature: position must be inside [0, L]");
  // Boundary conditions of the clamped-free beam: curvature maximum at the
  // root, zero bending moment at the tip.
  if (position_ratio == 0.0) return 1.0;
  if (position_ratio == 1.0) return 0.0;
  const double u = mode.eigenvalue * position_ratio;
  const double grow = std::exp(u) * mode.one_minus_sigma;
  const double decay = std::exp(-u) * mode.one_plus_sigma;
  return 0.25 * (grow + decay) + 0.5 * (std::cos(u) - mode.shape_coefficient * std::sin(u));
}

// [phi''_i(x)]^2 scaled so the clamped-end value is exactly 1.
inline double normalized_curvature_sq(const ModeBasis& mode, double position_ratio) {
  const double c = normalized_curvature(mode, position_ratio);
  const double sq = c * c;
  return sq > 1.0 ? 1.0 : sq;
}

// Crack severity gamma(a/H) as a monotone interpolation through anchor
// points. The toolkit's defaults come from the reference beam's published
// anchor values; arbitrary tables can be loaded from disk.
struct SeverityAnchor {
  double depth_ratio;  // a/H in [0,1)
  double severity;     // gamma in [0,1)
};

enum class InterpolationKind { monotone_cubic, linear };

class SeverityModel {
 public:
  SeverityModel(std::vector<SeverityAnchor> anchors, InterpolationKind kind = InterpolationKind::monotone_cubic)
      : anchors_(std::move(anchors)), kind_(kind) {
    validate_anchors();
    if (kind_ == InterpolationKind::monotone_cubic) build_slopes();
  }

  // Reference-beam table. The first three interior anchors are the
  // published severities for 20%, 25% and 50% relative depth; the 64%
  // anchor extends the curve to the deepest generated crack by the
  // power law fitted through the last two published points.
  static SeverityModel reference() {
    return SeverityModel({{0.0, 0.0},
                          {0.20, 0.0033459},
                          {0.25, 0.0051},
                          {0.50, 0.0262},
                          {0.64, 0.046927106723160764}});
  }

  static SeverityModel from_file(const std::string& path,
                                 InterpolationKind kind = InterpolationKind::monotone_cubic) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open severity table " + path);
    std::vector<SeverityAnchor> anchors;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string_view sv = csv::trim(line);
      if (sv.empty() || sv.front() == '#') continue;
      // two whitespace- or comma-separated columns
      std::string normalized(sv);
      for (char& c : normalized)
        if (c == '\t' || c == ',') c = ' ';
      std::istringstream iss(normalized);
      std::string a, b, extra;
      if (!(iss >> a >> b) || (iss >> extra))
        throw ParseError("severity table: expected two columns", line_no);
      anchors.push_back({csv::parse_double(a, line_no), csv::parse_double(b, line_no)});
    }
    if (anchors.empty()) throw ValidationError("severity table " + path + " has no anchors");
    return SeverityModel(std::move(anchors), kind);
  }

  double max_depth_ratio() const { return anchors_.back().depth_ratio; }
  const std::vector<SeverityAnchor>& anchors() const { return anchors_; }

  double severity(double depth_ratio) const {
    if (depth_ratio < 0.0) throw DomainError("severity: depth ratio must be nonnegative");
    if (depth_ratio > anchors_.back().depth_ratio)
      throw DomainError("severity: depth ratio " + csv::format_double(depth_ratio) + " beyond last anchor " +
                        csv::format_double(anchors_.back().depth_ratio) + " (no extrapolation)");
    // exact at anchors
    for (const auto& a : anchors_)
      if (depth_ratio == a.depth_ratio) return a.severity;
    std::size_t k = 0;
    while (anchors_[k + 1].depth_ratio < depth_ratio) ++k;
    const double h = anchors_[k + 1].depth_ratio - anchors_[k].depth_ratio;
    const double t = (depth_ratio - anchors_[k].depth_ratio) / h;
    if (kind_ == InterpolationKind::linear)
      return anchors_[k].severity + t * (anchors_[k + 1].severity - anchors_[k].severity);
    // cubic Hermite on [x_k, x_{k+1}]
    const double y0 = anchors_[k].severity;
    const double y1 = anchors_[k + 1].severity;
    const double m0 = slopes_[k] * h;
    const double m1 = slopes_[k + 1] * h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * m1;
  }

 private:
  void validate_anchors() {
    if (anchors_.size() < 2) throw ValidationError("SeverityModel: need at least two anchors");
    for (std::size_t i = 0; i < anchors_.size(); ++i) {
      const auto& a = anchors_[i];
      if (a.depth_ratio < 0.0 || a.depth_ratio >= 1.0 || a.severity < 0.0 || a.severity >= 1.0)
        throw ValidationError("SeverityModel: anchors must lie in [0,1) x [0,1)");
      if (i > 0 && a.depth_ratio <= anchors_[i - 1].depth_ratio)
        throw ValidationError("SeverityModel: anchor depth ratios must be strictly increasing");
      if (i > 0 && a.severity < anchors_[i - 1].severity)
        throw ValidationError("SeverityModel: anchor severities must be nondecreasing");
    }
    if (anchors_.front().depth_ratio != 0.0 || anchors_.front().severity != 0.0)
      throw ValidationError("SeverityModel: first anchor must be (0, 0)");
  }

  // Fritsch-Carlson slopes: monotone on every interval, exact at anchors.
  void build_slopes() {
    const std::size_t n = anchors_.size();
    std::vector<double> h(n - 1), delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      h[i] = anchors_[i + 1].depth_ratio - anchors_[i].depth_ratio;
      delta[i] = (anchors_[i + 1].severity - anchors_[i].severity) / h[i];
    }
    slopes_.assign(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (delta[i - 1] == 0.0 || delta[i] == 0.0 || (delta[i - 1] > 0) != (delta[i] > 0)) {
        slopes_[i] = 0.0;
      } else {
        const double w1 = 2 * h[i] + h[i - 1];
        const double w2 = h[i] + 2 * h[i - 1];
        slopes_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
      }
    }
    slopes_[0] = endpoint_slope(h[0], h.size() > 1 ? h[1] : h[0], delta[0], delta.size() > 1 ? delta[1] : delta[0]);
    slopes_[n - 1] = endpoint_slope(h[n - 2], n > 2 ? h[n - 3] : h[n - 2], delta[n - 2], n > 2 ? delta[n - 3] : delta[n - 2]);
  }

  static double endpoint_slope(double h0, double h1, double d0, double d1) {
    // one-sided three-point estimate, clipped to preserve shape
    const double m = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if ((m > 0) != (d0 > 0) || (m != 0.0 && d0 == 0.0)) return 0.0;
    if ((d0 > 0) != (d1 > 0) && std::abs(m) > 3.0 * std::abs(d0)) return 3.0 * d0;
    return m;
  }

  std::vector<SeverityAnchor> anchors_;
  InterpolationKind kind_;
  std::vector<double> slopes_;
};

}  // namespace lcnr::beam
