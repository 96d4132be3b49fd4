#include "lbds/reflected_sde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "lbds/error.hpp"
#include "lbds/rng.hpp"

namespace lbds {

namespace {

double norm2(std::span<const double> v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

std::string point_string(std::span<const double> x) {
  std::ostringstream s;
  s << "(";
  for (std::size_t i = 0; i < x.size(); ++i) s << (i ? ", " : "") << x[i];
  s << ")";
  return s.str();
}

}  // namespace

SmoothDomain SmoothDomain::interval(double a, double b, double sphere_constant) {
  if (!(std::isfinite(a) && std::isfinite(b) && a < b))
    throw InvalidArgument("interval domain needs finite a < b");
  if (!(sphere_constant > 0.0)) throw InvalidArgument("sphere constant must be positive");
  SmoothDomain d;
  d.kind_ = DomainKind::interval;
  d.dim_ = 1;
  d.a_ = a;
  d.b_ = b;
  d.m_ = sphere_constant;
  return d;
}

SmoothDomain SmoothDomain::ball(std::vector<double> center, double radius, double sphere_constant) {
  if (center.empty()) throw InvalidArgument("ball domain needs a center");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw InvalidArgument("ball radius must be positive");
  if (!(sphere_constant > 0.0)) throw InvalidArgument("sphere constant must be positive");
  SmoothDomain d;
  d.kind_ = DomainKind::ball;
  d.dim_ = center.size();
  d.center_ = std::move(center);
  d.radius_ = radius;
  d.m_ = sphere_constant;
  if (d.dim_ == 1) {
    d.a_ = d.center_[0] - radius;
    d.b_ = d.center_[0] + radius;
  }
  return d;
}

SmoothDomain SmoothDomain::custom(std::size_t dim, ScalarField psi, VectorField grad,
                                  double sphere_constant) {
  if (dim == 0 || !psi || !grad) throw InvalidArgument("custom domain needs Psi and its gradient");
  SmoothDomain d;
  d.kind_ = DomainKind::custom;
  d.dim_ = dim;
  d.psi_ = std::move(psi);
  d.grad_ = std::move(grad);
  d.m_ = sphere_constant;
  return d;
}

double SmoothDomain::psi(std::span<const double> x) const {
  switch (kind_) {
    case DomainKind::interval:
      return (x[0] - a_) * (b_ - x[0]) / (b_ - a_);
    case DomainKind::ball: {
      double r2 = 0.0;
      for (std::size_t i = 0; i < dim_; ++i) r2 += (x[i] - center_[i]) * (x[i] - center_[i]);
      return (radius_ * radius_ - r2) / (2.0 * radius_);
    }
    case DomainKind::custom:
      return psi_(x);
  }
  return 0.0;
}

void SmoothDomain::grad_psi(std::span<const double> x, std::span<double> out) const {
  switch (kind_) {
    case DomainKind::interval:
      out[0] = (a_ + b_ - 2.0 * x[0]) / (b_ - a_);
      return;
    case DomainKind::ball:
      for (std::size_t i = 0; i < dim_; ++i) out[i] = -(x[i] - center_[i]) / radius_;
      return;
    case DomainKind::custom:
      grad_(x, out);
      return;
  }
}

bool SmoothDomain::contains(std::span<const double> x, double tol) const {
  switch (kind_) {
    case DomainKind::interval:
      return x[0] >= a_ - tol && x[0] <= b_ + tol;
    case DomainKind::ball: {
      double r2 = 0.0;
      for (std::size_t i = 0; i < dim_; ++i) r2 += (x[i] - center_[i]) * (x[i] - center_[i]);
      return std::sqrt(r2) <= radius_ + tol;
    }
    case DomainKind::custom:
      return psi_(x) >= -tol;
  }
  return false;
}

double SmoothDomain::boundary_distance(std::span<const double> x) const {
  switch (kind_) {
    case DomainKind::interval:
      return std::min(std::abs(x[0] - a_), std::abs(b_ - x[0]));
    case DomainKind::ball: {
      double r2 = 0.0;
      for (std::size_t i = 0; i < dim_; ++i) r2 += (x[i] - center_[i]) * (x[i] - center_[i]);
      return std::abs(radius_ - std::sqrt(r2));
    }
    case DomainKind::custom: {
      std::vector<double> g(dim_);
      grad_(x, g);
      const double gn = norm2(g);
      return gn > 0.0 ? std::abs(psi_(x)) / gn : std::abs(psi_(x));
    }
  }
  return 0.0;
}

SmoothDomain make_domain(const DomainSpec& spec) {
  switch (spec.kind) {
    case DomainKind::interval:
      return SmoothDomain::interval(spec.a, spec.b, spec.sphere_constant);
    case DomainKind::ball:
      return SmoothDomain::ball(spec.center, spec.radius, spec.sphere_constant);
    case DomainKind::custom:
      break;
  }
  throw InvalidArgument("custom domains cannot be built from a preset spec");
}

double step_reflect_inplace(const SmoothDomain& domain, std::span<double> x,
                            std::span<const double> increment) {
  const std::size_t l = domain.dim();
  if (x.size() != l || increment.size() != l)
    throw InvalidArgument("reflection step dimension mismatch");
  for (std::size_t i = 0; i < l; ++i) x[i] += increment[i];
  switch (domain.kind()) {
    case DomainKind::interval: {
      if (x[0] < domain.lower()) {
        const double dk = domain.lower() - x[0];
        x[0] = domain.lower();
        return dk;
      }
      if (x[0] > domain.upper()) {
        const double dk = x[0] - domain.upper();
        x[0] = domain.upper();
        return dk;
      }
      return 0.0;
    }
    case DomainKind::ball: {
      const auto c = domain.center();
      const double R = domain.radius();
      double r2 = 0.0;
      for (std::size_t i = 0; i < l; ++i) r2 += (x[i] - c[i]) * (x[i] - c[i]);
      const double r = std::sqrt(r2);
      if (r <= R) return 0.0;
      if (r > 2.0 * R)
        throw NumericalError("reflection step overshoots past the ball center; reduce the step size");
      for (std::size_t i = 0; i < l; ++i) x[i] = c[i] + (x[i] - c[i]) * (R / r);
      return r - R;
    }
    case DomainKind::custom:
      break;
  }
  throw InvalidArgument("reflection steps need an interval or ball domain");
}

ReflectStep step_reflect(const SmoothDomain& domain, std::span<const double> x,
                         std::span<const double> increment) {
  if (!domain.contains(x)) throw InvalidArgument("reflection step must start in the closed domain");
  ReflectStep out{std::vector<double>(x.begin(), x.end()), 0.0};
  out.dkappa = step_reflect_inplace(domain, out.point, increment);
  return out;
}

namespace {

// Uniform sample of the closure (rejection from the bounding box for balls).
std::vector<double> sample_closure(const SmoothDomain& domain, CounterRng& rng) {
  const std::size_t l = domain.dim();
  std::vector<double> x(l);
  if (domain.kind() == DomainKind::interval) {
    x[0] = domain.lower() + (domain.upper() - domain.lower()) * rng.uniform();
    return x;
  }
  const auto c = domain.center();
  const double R = domain.radius();
  for (;;) {
    double r2 = 0.0;
    for (std::size_t i = 0; i < l; ++i) {
      x[i] = c[i] + R * (2.0 * rng.uniform() - 1.0);
      r2 += (x[i] - c[i]) * (x[i] - c[i]);
    }
    if (r2 <= R * R) return x;
  }
}

std::vector<double> sample_boundary(const SmoothDomain& domain, CounterRng& rng) {
  const std::size_t l = domain.dim();
  std::vector<double> x(l);
  if (domain.kind() == DomainKind::interval) {
    x[0] = rng.uniform() < 0.5 ? domain.lower() : domain.upper();
    return x;
  }
  double n = 0.0;
  while (n < 1e-12) {
    n = 0.0;
    for (std::size_t i = 0; i < l; ++i) {
      x[i] = rng.normal();
      n += x[i] * x[i];
    }
    n = std::sqrt(n);
  }
  const auto c = domain.center();
  for (std::size_t i = 0; i < l; ++i) x[i] = c[i] + domain.radius() * x[i] / n;
  return x;
}

}  // namespace

InteriorSphereReport check_interior_sphere(const SmoothDomain& domain, std::size_t pairs,
                                           std::uint64_t seed) {
  if (domain.kind() == DomainKind::custom)
    throw InvalidArgument("interior-sphere sampling needs an interval or ball domain");
  CounterRng rng(seed, 0, 0, StreamTag::probe);
  InteriorSphereReport rep;
  rep.pairs = pairs;
  rep.min_value = std::numeric_limits<double>::infinity();
  std::vector<double> g(domain.dim());
  for (std::size_t k = 0; k < pairs; ++k) {
    const auto x = sample_boundary(domain, rng);
    const auto xp = sample_closure(domain, rng);
    domain.grad_psi(x, g);
    double dist2 = 0.0, inner = 0.0;
    for (std::size_t i = 0; i < domain.dim(); ++i) {
      dist2 += (xp[i] - x[i]) * (xp[i] - x[i]);
      inner += g[i] * (xp[i] - x[i]);
    }
    const double v = dist2 + domain.sphere_constant() * inner;
    rep.min_value = std::min(rep.min_value, v);
    if (v < -1e-12) ++rep.violations;
  }
  return rep;
}

SigmaField constant_sigma(std::vector<double> value) {
  return [value = std::move(value)](std::span<const double>, std::span<double> out) {
    std::copy(value.begin(), value.end(), out.begin());
  };
}

void validate_jump_invariance(const SmoothDomain& domain, const LevyCharacteristics& chars,
                              const SigmaField& sigma, std::size_t samples_per_axis) {
  if (chars.atoms().empty()) return;
  const std::size_t l = domain.dim();
  std::vector<std::vector<double>> points;
  if (domain.kind() == DomainKind::interval || (domain.kind() == DomainKind::ball && l == 1)) {
    const double a = domain.kind() == DomainKind::interval ? domain.lower() : domain.center()[0] - domain.radius();
    const double b = domain.kind() == DomainKind::interval ? domain.upper() : domain.center()[0] + domain.radius();
    for (std::size_t k = 0; k < samples_per_axis; ++k)
      points.push_back({a + (b - a) * static_cast<double>(k) / static_cast<double>(samples_per_axis - 1)});
  } else if (domain.kind() == DomainKind::ball) {
    CounterRng rng(0x5eed, 0, 0, StreamTag::probe);
    for (std::size_t k = 0; k < samples_per_axis; ++k) points.push_back(sample_closure(domain, rng));
    for (std::size_t k = 0; k < samples_per_axis; ++k) points.push_back(sample_boundary(domain, rng));
  } else {
    throw InvalidArgument("jump invariance can only be sampled on preset domains");
  }
  std::vector<double> s(l), y(l);
  for (const auto& x : points) {
    sigma(x, s);
    for (const auto& atom : chars.atoms()) {
      for (std::size_t i = 0; i < l; ++i) y[i] = x[i] + s[i] * atom.size;
      if (!domain.contains(y, 1e-12)) {
        std::ostringstream msg;
        msg << "jump of size " << atom.size << " from x = " << point_string(x)
            << " leaves the closed domain";
        throw InvalidArgument(msg.str());
      }
    }
  }
}

class ReflectedBatchBuilder {
 public:
  static ReflectedBatch allocate(const SmoothDomain& domain, const ReflectStart& start,
                                 const PathBatch& batch) {
    if (start.x.size() != domain.dim()) throw InvalidArgument("start point dimension mismatch");
    if (!domain.contains(start.x)) throw InvalidArgument("start point lies outside the closed domain");
    if (start.node > batch.steps()) throw InvalidArgument("start node beyond the grid");
    ReflectedBatch r;
    r.n_paths_ = batch.paths();
    r.n_steps_ = batch.steps();
    r.dim_ = domain.dim();
    r.start_node_ = start.node;
    r.X_.resize(r.n_paths_ * (r.n_steps_ + 1) * r.dim_);
    r.kappa_.resize(r.n_paths_ * (r.n_steps_ + 1));
    r.near_.assign(r.n_paths_ * r.n_steps_, 0);
    return r;
  }

  // Returns the largest displacement magnitude applied within one interval.
  static double run_path(const SmoothDomain& domain, const SigmaField& sigma,
                         const ReflectStart& start, const PathBatch& batch, std::size_t p,
                         ReflectedBatch& r) {
    const std::size_t l = domain.dim();
    const std::size_t n = batch.steps();
    const auto& gi = batch.integrals();
    std::vector<double> x(start.x), s(l), inc(l);
    double kappa = 0.0;
    double max_move = 0.0;
    std::vector<double> dk(n, 0.0);
    auto store = [&](std::size_t node) {
      std::copy(x.begin(), x.end(), r.X_.begin() + static_cast<std::ptrdiff_t>((p * (n + 1) + node) * l));
      r.kappa_[p * (n + 1) + node] = kappa;
    };
    for (std::size_t node = 0; node <= start.node; ++node) store(node);
    for (std::size_t i = start.node; i < n; ++i) {
      const double t0 = batch.grid().node(i);
      const double dt = batch.grid().dt(i);
      const double dlc = batch.dL_continuous(p, i);
      double t = t0;
      double moved = 0.0;
      double dki = 0.0;
      auto continuous = [&](double until) {
        const double frac = (until - t) / dt;
        if (frac <= 0.0) return;
        sigma(x, s);
        for (std::size_t m = 0; m < l; ++m) inc[m] = s[m] * dlc * frac;
        moved += norm2(inc);
        dki += step_reflect_inplace(domain, x, inc);
        t = until;
      };
      for (const auto& ev : batch.jumps(p, i)) {
        continuous(ev.time);
        sigma(x, s);
        const double e = gi.atom_size[ev.atom];
        for (std::size_t m = 0; m < l; ++m) inc[m] = s[m] * e;
        const std::vector<double> before(x);
        for (std::size_t m = 0; m < l; ++m) x[m] += inc[m];
        moved += norm2(inc);
        if (!domain.contains(x, 1e-12)) {
          std::ostringstream msg;
          msg << "jump of size " << e << " from x = " << point_string(before)
              << " leaves the closed domain";
          throw NumericalError(msg.str());
        }
      }
      continuous(t0 + dt);
      kappa += dki;
      dk[i] = dki;
      max_move = std::max(max_move, moved);
      store(i + 1);
    }
    return max_move;
  }

  static void finish(const SmoothDomain& domain, ReflectedBatch& r, double max_move) {
    r.boundary_tol_ = std::max(max_move, 1e-9);
    const std::size_t n = r.n_steps_;
    for (std::size_t p = 0; p < r.n_paths_; ++p)
      for (std::size_t i = 0; i < n; ++i) {
        const double dk = r.kappa(p, i + 1) - r.kappa(p, i);
        r.near_[p * n + i] = dk > 0.0 && domain.boundary_distance(r.X(p, i + 1)) <= r.boundary_tol_;
      }
  }
};

namespace {

void check_inputs(const SmoothDomain& domain, const LevyCharacteristics& chars,
                  const PathBatch& batch) {
  if (domain.kind() == DomainKind::custom)
    throw InvalidArgument("reflected paths need an interval or ball domain");
  if (chars.atoms().size() != batch.integrals().n_atoms)
    throw InvalidArgument("path batch was not simulated from these characteristics");
}

}  // namespace

ReflectedBatch solve_paths(const SmoothDomain& domain, const LevyCharacteristics& chars,
                           const SigmaField& sigma, const ReflectStart& start,
                           const PathBatch& batch) {
  check_inputs(domain, chars, batch);
  auto r = ReflectedBatchBuilder::allocate(domain, start, batch);
  double max_move = 0.0;
  std::string failure;
  const auto np = static_cast<std::ptrdiff_t>(batch.paths());
#pragma omp parallel for schedule(static) reduction(max : max_move)
  for (std::ptrdiff_t ps = 0; ps < np; ++ps) {
    try {
      max_move = std::max(max_move, ReflectedBatchBuilder::run_path(domain, sigma, start, batch,
                                                                   static_cast<std::size_t>(ps), r));
    } catch (const std::exception& e) {
#pragma omp critical(lbds_reflect_failure)
      if (failure.empty()) failure = e.what();
    }
  }
  if (!failure.empty()) throw NumericalError(failure);
  ReflectedBatchBuilder::finish(domain, r, max_move);
  return r;
}

ReflectedBatch solve_paths_serial(const SmoothDomain& domain, const LevyCharacteristics& chars,
                                  const SigmaField& sigma, const ReflectStart& start,
                                  const PathBatch& batch) {
  check_inputs(domain, chars, batch);
  auto r = ReflectedBatchBuilder::allocate(domain, start, batch);
  double max_move = 0.0;
  for (std::size_t p = 0; p < batch.paths(); ++p)
    max_move = std::max(max_move, ReflectedBatchBuilder::run_path(domain, sigma, start, batch, p, r));
  ReflectedBatchBuilder::finish(domain, r, max_move);
  return r;
}

ComplementarityReport complementarity(const SmoothDomain& domain, const ReflectedBatch& refl) {
  ComplementarityReport rep;
  rep.boundary_tol = refl.boundary_tol();
  rep.min_psi = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < refl.paths(); ++p) {
    for (std::size_t node = 0; node <= refl.steps(); ++node)
      rep.min_psi = std::min(rep.min_psi, domain.psi(refl.X(p, node)));
    for (std::size_t i = 0; i < refl.steps(); ++i) {
      const double dk = refl.kappa(p, i + 1) - refl.kappa(p, i);
      if (dk <= 0.0) continue;
      ++rep.active_intervals;
      if (!refl.near_boundary(p, i)) rep.off_boundary_kappa += dk;
    }
  }
  return rep;
}

ReflectedMoments reflected_moments(const ReflectedBatch& refl, double p, double mu) {
  ReflectedMoments m;
  const auto n = static_cast<double>(refl.paths());
  for (std::size_t path = 0; path < refl.paths(); ++path) {
    double sup = 0.0;
    for (std::size_t node = 0; node <= refl.steps(); ++node) sup = std::max(sup, norm2(refl.X(path, node)));
    const double kT = refl.kappa(path, refl.steps());
    m.sup_abs_pow_mean += std::pow(sup, p) / n;
    m.exp_kappa_mean += std::exp(mu * kT) / n;
    m.kappa_T_mean += kT / n;
  }
  return m;
}

LevyCharacteristics truncate_small_jumps(const LevyCharacteristics& chars, std::size_t n) {
  if (n == 0) throw InvalidArgument("truncation level n must be at least 1");
  const double cut = 1.0 / static_cast<double>(n);
  std::vector<JumpAtom> kept;
  for (const auto& a : chars.atoms())
    if (std::abs(a.size) > cut) kept.push_back(a);
  return LevyCharacteristics(chars.horizon(), chars.drift(), chars.diffusion(), std::move(kept),
                             chars.mode());
}

}  // namespace lbds
