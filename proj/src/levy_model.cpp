#include "lbds/levy_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lbds/error.hpp"

namespace lbds {
namespace {

constexpr int kSamples = 257;
constexpr double kRatioTol = 1e-10;
constexpr double kTimeSlack = 1e-12;

// (NL2) is checked on [-(1 + eps) C, (1 + eps) C] with eps = C = 1.
constexpr double kNl2UMax = 2.0;

double sample_time(double horizon, int k) { return horizon * k / (kSamples - 1); }

double pi_weight(double t, const TimeFunction& diffusion, std::span<const JumpAtom> atoms) {
  double w = diffusion(t);
  for (const auto& a : atoms) w += a.size * a.size * a.intensity(t);
  return w;
}

std::optional<double> find_reference_time(double horizon, const TimeFunction& diffusion,
                                          std::span<const JumpAtom> atoms) {
  for (int k = 0; k < kSamples; ++k) {
    double t = sample_time(horizon, k);
    if (pi_weight(t, diffusion, atoms) > 0.0) return t;
  }
  return std::nullopt;
}

bool component_follows(const TimeFunction& w, double horizon, double t_ref,
                       const TimeFunction& diffusion, std::span<const JumpAtom> atoms,
                       double total_ref) {
  const double w_ref = w(t_ref);
  for (int k = 0; k < kSamples; ++k) {
    double t = sample_time(horizon, k);
    double r = pi_weight(t, diffusion, atoms) / total_ref;
    double wt = w(t);
    if (w_ref > 0.0) {
      if (std::abs(wt / w_ref - r) > kRatioTol * std::max(1.0, r)) return false;
    } else if (std::abs(wt) > kRatioTol * std::max(1.0, r * total_ref)) {
      return false;
    }
  }
  return true;
}

}  // namespace

bool detect_proportional(double horizon, const TimeFunction& diffusion,
                         std::span<const JumpAtom> atoms) {
  auto t_ref = find_reference_time(horizon, diffusion, atoms);
  if (!t_ref) return true;  // everything vanishes: trivially proportional
  double total_ref = pi_weight(*t_ref, diffusion, atoms);
  if (!component_follows(diffusion, horizon, *t_ref, diffusion, atoms, total_ref)) return false;
  for (const auto& a : atoms)
    if (!component_follows(a.intensity, horizon, *t_ref, diffusion, atoms, total_ref))
      return false;
  return true;
}

LevyCharacteristics::LevyCharacteristics(double horizon, TimeFunction drift,
                                         TimeFunction diffusion, std::vector<JumpAtom> atoms,
                                         Modulation mode)
    : horizon_(horizon),
      drift_(std::move(drift)),
      diffusion_(std::move(diffusion)),
      atoms_(std::move(atoms)),
      mode_(mode) {
  if (!(horizon_ > 0.0) || !std::isfinite(horizon_))
    throw InvalidArgument("horizon T must be positive and finite");
  std::stable_sort(atoms_.begin(), atoms_.end(),
                   [](const JumpAtom& x, const JumpAtom& y) { return x.size < y.size; });
  for (const auto& a : atoms_) {
    if (a.size == 0.0 || !std::isfinite(a.size))
      throw InvalidArgument("jump atom of size 0 is not allowed (F({0}) = 0)");
  }
  for (int k = 0; k < kSamples; ++k) {
    double t = sample_time(horizon_, k);
    double c = diffusion_(t);
    if (!(c >= 0.0) || !std::isfinite(c))
      throw InvalidArgument("diffusion c(t) must be finite and nonnegative");
    if (!std::isfinite(drift_(t))) throw InvalidArgument("drift b(t) must be finite");
    for (const auto& a : atoms_) {
      double lam = a.intensity(t);
      if (!std::isfinite(lam)) throw InvalidArgument("intensity must be finite");
      if (lam < 0.0) {
        std::ostringstream msg;
        msg << "negative intensity " << lam << " for atom e=" << a.size << " at t=" << t;
        throw InvalidArgument(msg.str());
      }
    }
  }

  report_.proportional_detected = detect_proportional(horizon_, diffusion_, atoms_);
  if (mode_ == Modulation::proportional && !report_.proportional_detected)
    throw InvalidArgument(
        "proportional modulation requested but intensity/diffusion ratios are not constant");

  auto t_ref = find_reference_time(horizon_, diffusion_, atoms_);
  report_.reference_time = t_ref.value_or(0.0);
  reference_weight_ = pi_weight(report_.reference_time, diffusion_, atoms_);

  report_.nl1_integral = integrate(
      [this](double t) {
        double v = std::abs(drift_(t)) + std::abs(diffusion_(t));
        for (const auto& a : atoms_) v += std::min(1.0, a.size * a.size) * a.intensity(t);
        return v;
      },
      0.0, horizon_);
  if (!std::isfinite(report_.nl1_integral)) throw InvalidArgument("(NL1) integral is not finite");

  // exp(u e) is convex in u, so the supremum sits at an endpoint.
  report_.nl2_u_max = kNl2UMax;
  for (double u : {-kNl2UMax, kNl2UMax}) {
    double bound = 0.0;
    for (const auto& a : atoms_)
      if (std::abs(a.size) > 1.0)
        bound += std::exp(u * a.size) * a.intensity.integrate(0.0, horizon_);
    report_.nl2_bound = std::max(report_.nl2_bound, bound);
  }

  if (mode_ == Modulation::proportional) {
    for (int k = 0; k < kSamples; k += 16) {
      double t = sample_time(horizon_, k);
      report_.modulation_samples.emplace_back(t, modulation(t));
    }
  }
}

double LevyCharacteristics::modulation(double t) const {
  if (mode_ != Modulation::proportional)
    throw InvalidArgument("modulation r(t) is defined in proportional mode only");
  if (reference_weight_ <= 0.0) return 1.0;
  return pi_weight(t, diffusion_, atoms_) / reference_weight_;
}

double LevyCharacteristics::modulation_integral(double a, double b) const {
  if (mode_ != Modulation::proportional)
    throw InvalidArgument("modulation r(t) is defined in proportional mode only");
  if (reference_weight_ <= 0.0) return b - a;
  bool constant = diffusion_.is_constant();
  for (const auto& atom : atoms_) constant = constant && atom.intensity.is_constant();
  if (constant) return b - a;
  return integrate([this](double t) { return modulation(t); }, a, b);
}

double LevyCharacteristics::reference_diffusion() const {
  return diffusion_(report_.reference_time);
}

double LevyCharacteristics::reference_intensity(std::size_t atom) const {
  return atoms_.at(atom).intensity(report_.reference_time);
}

void LevyCharacteristics::check_time(double t) const {
  if (!(t >= -kTimeSlack && t <= horizon_ + kTimeSlack)) {
    std::ostringstream msg;
    msg << "time " << t << " outside horizon [0, " << horizon_ << "]";
    throw InvalidArgument(msg.str());
  }
}

ValidationReport validate_characteristics(const LevyCharacteristics& chars) {
  return chars.report();
}

double mean_drift(const LevyCharacteristics& chars, double t) {
  chars.check_time(t);
  double v = chars.drift()(t);
  for (const auto& a : chars.atoms())
    if (std::abs(a.size) > 1.0) v += a.size * a.intensity(t);
  return v;
}

double power_moment(const LevyCharacteristics& chars, int i, double t) {
  if (i < 1) throw InvalidArgument("moment order must be >= 1");
  chars.check_time(t);
  if (t <= 0.0) return 0.0;
  if (i == 1) {
    double v = chars.drift().integrate(0.0, t);
    for (const auto& a : chars.atoms())
      if (std::abs(a.size) > 1.0) v += a.size * a.intensity.integrate(0.0, t);
    return v;
  }
  double v = 0.0;
  for (const auto& a : chars.atoms()) v += std::pow(a.size, i) * a.intensity.integrate(0.0, t);
  return v;
}

MomentTable::MomentTable(const LevyCharacteristics& chars, int i_max)
    : chars_(chars), i_max_(i_max) {
  if (i_max < 1) throw InvalidArgument("moment table needs i_max >= 1");
}

double MomentTable::operator()(int i, double t) const {
  if (i > i_max_) throw InvalidArgument("moment order above table range");
  return power_moment(chars_, i, t);
}

}  // namespace lbds
