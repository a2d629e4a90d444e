#include "confsel/kernel.hpp"

#include "confsel/error.hpp"
#include "confsel/io.hpp"
#include "confsel/optimize.hpp"
#include "confsel/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace confsel::kernel {

KernelMeta make_meta(const Eigen::MatrixXd& x, std::span<const VariableKind> kinds) {
  if (static_cast<Eigen::Index>(kinds.size()) != x.cols())
    throw BackendError("kernel: kind metadata does not match covariate count");
  KernelMeta meta;
  meta.kinds.assign(kinds.begin(), kinds.end());
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    double sd = 0.0;
    if (x.rows() > 1) {
      double m = x.col(k).mean();
      sd = std::sqrt((x.col(k).array() - m).square().sum() / static_cast<double>(x.rows() - 1));
    }
    meta.scales.push_back(sd > 0.0 ? sd : 1.0);
  }
  return meta;
}

double discrete_upper(const VariableKind& kind) {
  if (kind.tag == KindTag::OrderedDiscrete) return 1.0;
  if (kind.tag == KindTag::UnorderedDiscrete) return static_cast<double>(kind.categories - 1) / kind.categories;
  return std::numeric_limits<double>::infinity();
}

bool BandwidthVector::admissible(const KernelMeta& meta, double h_min_factor) const {
  if (values.size() != meta.size()) return false;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double v = values[k];
    if (std::isnan(v)) return false;
    if (meta.kinds[k].is_continuous()) {
      if (!(v >= h_min_factor * meta.scales[k])) return false;
    } else if (v < 0.0 || v > discrete_upper(meta.kinds[k])) {
      return false;
    }
  }
  return true;
}

void ThresholdPolicy::validate(const KernelMeta& meta) const {
  if (!(continuous > 0.0)) throw ValidationError("continuous threshold must be positive");
  if (!(ordered > 0.0 && ordered <= 1.0)) throw ValidationError("ordered threshold must lie in (0, 1]");
  if (!(unordered > 0.0)) throw ValidationError("unordered threshold must be positive");
  for (const auto& kind : meta.kinds) {
    if (kind.tag == KindTag::UnorderedDiscrete && unordered > discrete_upper(kind))
      throw ValidationError("unordered threshold " + io::format_double(unordered) + " exceeds the maximum bandwidth " +
                            io::format_double(discrete_upper(kind)) + " of a " + kind.to_string() + " covariate");
  }
}

double ThresholdPolicy::threshold_for(const KernelMeta& meta, std::size_t column) const {
  switch (meta.kinds[column].tag) {
    case KindTag::Continuous: return continuous * meta.scales[column];
    case KindTag::OrderedDiscrete: return ordered;
    case KindTag::UnorderedDiscrete: return unordered;
  }
  return continuous;
}

double kernel_weight(std::span<const double> row_i, std::span<const double> row_j, const BandwidthVector& bw,
                     const KernelMeta& meta) {
  double w = 1.0;
  for (std::size_t k = 0; k < meta.size(); ++k) {
    const double lam = bw.values[k];
    const double diff = row_i[k] - row_j[k];
    switch (meta.kinds[k].tag) {
      case KindTag::Continuous: {
        const double u = diff / lam;
        w *= std::exp(-0.5 * u * u) / (lam * std::sqrt(2.0 * std::numbers::pi));
        break;
      }
      case KindTag::OrderedDiscrete: {
        const double e = std::abs(diff);
        if (e != 0.0) w *= std::pow(lam, e);
        break;
      }
      case KindTag::UnorderedDiscrete:
        if (diff != 0.0) w *= lam;
        break;
    }
  }
  return w;
}

double kernel_regress(const Eigen::VectorXd& u, const Eigen::MatrixXd& x, const BandwidthVector& bw,
                      const KernelMeta& meta, std::span<const double> query) {
  if (query.size() != meta.size() || bw.values.size() != meta.size())
    throw BackendError("kernel_regress: dimension mismatch");
  double num = 0.0, den = 0.0;
  std::vector<double> row(meta.size());
  for (Eigen::Index j = 0; j < x.rows(); ++j) {
    for (std::size_t k = 0; k < meta.size(); ++k) row[k] = x(j, static_cast<Eigen::Index>(k));
    double w = kernel_weight(query, row, bw, meta);
    num += w * u(j);
    den += w;
  }
  if (!(den > 0.0)) {
    std::string q;
    for (std::size_t k = 0; k < query.size(); ++k) q += (k ? "," : "") + io::format_double(query[k]);
    throw BackendError("empty effective neighborhood at query row (" + q + ")");
  }
  return num / den;
}

// ---------------------------------------------------------------------------

struct CvObjective::Impl {
  KernelMeta meta;
  Eigen::VectorXd u;
  double u_sum = 0.0;
  int n = 0;

  // Grid path.
  bool grid = false;
  std::vector<int> categories;
  std::vector<std::size_t> strides;
  std::size_t cells = 0;
  std::vector<std::size_t> cell_of;
  std::vector<double> sums;  // interleaved (sum U, count) per cell

  // Pairwise path: row-major copies.
  std::vector<std::size_t> cont, ord, unord;
  std::vector<double> xc, xo, xu;  // n x |cont| etc.

  double fallback_term(int i) const {
    const double mean_rest = n > 1 ? (u_sum - u(i)) / (n - 1) : u(i);
    const double r = u(i) - mean_rest;
    return r * r;
  }

  double eval_grid(const BandwidthVector& bw) const {
    std::vector<double> v = sums;
    std::vector<double> fiber_in, fiber_out;
    for (std::size_t k = 0; k < categories.size(); ++k) {
      const int c = categories[k];
      const std::size_t s = strides[k];
      const double lam = bw.values[k];
      const bool ordered = meta.kinds[k].tag == KindTag::OrderedDiscrete;
      if (c == 2) {
        const std::size_t block = 2 * s;
        for (std::size_t b = 0; b < cells; b += block) {
          for (std::size_t o = 0; o < s; ++o) {
            const std::size_t i0 = 2 * (b + o), i1 = 2 * (b + o + s);
            const double a0 = v[i0], a1 = v[i0 + 1], b0 = v[i1], b1 = v[i1 + 1];
            v[i0] = a0 + lam * b0;
            v[i0 + 1] = a1 + lam * b1;
            v[i1] = lam * a0 + b0;
            v[i1 + 1] = lam * a1 + b1;
          }
        }
        continue;
      }
      // General c x c kernel matrix along this axis.
      std::vector<double> km(static_cast<std::size_t>(c * c));
      for (int a = 0; a < c; ++a)
        for (int b = 0; b < c; ++b)
          km[static_cast<std::size_t>(a * c + b)] =
              a == b ? 1.0 : (ordered ? std::pow(lam, std::abs(a - b)) : lam);
      fiber_in.resize(static_cast<std::size_t>(2 * c));
      fiber_out.resize(static_cast<std::size_t>(2 * c));
      const std::size_t block = static_cast<std::size_t>(c) * s;
      for (std::size_t b = 0; b < cells; b += block) {
        for (std::size_t o = 0; o < s; ++o) {
          for (int a = 0; a < c; ++a) {
            const std::size_t idx = 2 * (b + o + static_cast<std::size_t>(a) * s);
            fiber_in[static_cast<std::size_t>(2 * a)] = v[idx];
            fiber_in[static_cast<std::size_t>(2 * a + 1)] = v[idx + 1];
          }
          for (int a = 0; a < c; ++a) {
            double y0 = 0.0, y1 = 0.0;
            for (int bb = 0; bb < c; ++bb) {
              const double kab = km[static_cast<std::size_t>(a * c + bb)];
              y0 += kab * fiber_in[static_cast<std::size_t>(2 * bb)];
              y1 += kab * fiber_in[static_cast<std::size_t>(2 * bb + 1)];
            }
            fiber_out[static_cast<std::size_t>(2 * a)] = y0;
            fiber_out[static_cast<std::size_t>(2 * a + 1)] = y1;
          }
          for (int a = 0; a < c; ++a) {
            const std::size_t idx = 2 * (b + o + static_cast<std::size_t>(a) * s);
            v[idx] = fiber_out[static_cast<std::size_t>(2 * a)];
            v[idx + 1] = fiber_out[static_cast<std::size_t>(2 * a + 1)];
          }
        }
      }
    }
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const std::size_t cell = cell_of[static_cast<std::size_t>(i)];
      const double num = v[2 * cell] - u(i);
      const double den = v[2 * cell + 1] - 1.0;
      if (den > 0.0) {
        const double r = u(i) - num / den;
        total += r * r;
      } else {
        total += fallback_term(i);
      }
    }
    return total / n;
  }

  double eval_pairwise(const BandwidthVector& bw) const {
    const std::size_t q = cont.size(), ro = ord.size(), ru = unord.size();
    std::vector<double> inv_h(q), lam_o(ro), lam_u(ru);
    for (std::size_t k = 0; k < q; ++k) inv_h[k] = 1.0 / bw.values[cont[k]];
    for (std::size_t k = 0; k < ro; ++k) lam_o[k] = bw.values[ord[k]];
    for (std::size_t k = 0; k < ru; ++k) lam_u[k] = bw.values[unord[k]];

    // Continuous coordinates pre-divided by their bandwidths.
    std::vector<double> zc(xc.size());
    for (int i = 0; i < n; ++i)
      for (std::size_t k = 0; k < q; ++k) zc[i * q + k] = xc[i * q + k] * inv_h[k];

    std::vector<double> num(static_cast<std::size_t>(n), 0.0), den(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
      const double* ci = zc.data() + i * q;
      const double* oi = xo.data() + i * ro;
      const double* ui = xu.data() + i * ru;
      for (int j = i + 1; j < n; ++j) {
        double w = 1.0;
        const double* oj = xo.data() + j * ro;
        for (std::size_t k = 0; k < ro; ++k) {
          const double e = std::abs(oi[k] - oj[k]);
          if (e != 0.0) w *= e == 1.0 ? lam_o[k] : std::pow(lam_o[k], e);
        }
        const double* uj = xu.data() + j * ru;
        for (std::size_t k = 0; k < ru; ++k)
          if (ui[k] != uj[k]) w *= lam_u[k];
        if (w == 0.0) continue;
        if (q) {
          const double* cj = zc.data() + j * q;
          double d2 = 0.0;
          for (std::size_t k = 0; k < q; ++k) {
            const double d = ci[k] - cj[k];
            d2 += d * d;
          }
          w *= std::exp(-0.5 * d2);
        }
        num[static_cast<std::size_t>(i)] += w * u(j);
        den[static_cast<std::size_t>(i)] += w;
        num[static_cast<std::size_t>(j)] += w * u(i);
        den[static_cast<std::size_t>(j)] += w;
      }
    }
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = den[static_cast<std::size_t>(i)];
      if (d > 0.0) {
        const double r = u(i) - num[static_cast<std::size_t>(i)] / d;
        total += r * r;
      } else {
        total += fallback_term(i);
      }
    }
    return total / n;
  }
};

CvObjective::CvObjective(const Eigen::VectorXd& u, const Eigen::MatrixXd& x, KernelMeta meta)
    : impl_(std::make_unique<Impl>()) {
  auto& m = *impl_;
  if (u.size() != x.rows()) throw BackendError("loo_cv: response length differs from row count");
  if (static_cast<Eigen::Index>(meta.size()) != x.cols()) throw BackendError("loo_cv: metadata width mismatch");
  m.meta = std::move(meta);
  m.u = u;
  m.u_sum = u.sum();
  m.n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());

  bool all_discrete = p > 0;
  double cells = 1.0, cost = 0.0;
  for (int k = 0; k < p; ++k) {
    const auto& kind = m.meta.kinds[static_cast<std::size_t>(k)];
    if (!kind.is_discrete()) {
      all_discrete = false;
      break;
    }
    cells *= kind.categories;
  }
  if (all_discrete) {
    for (int k = 0; k < p; ++k) cost += cells * m.meta.kinds[static_cast<std::size_t>(k)].categories;
    const double pair_cost = 0.5 * static_cast<double>(m.n) * m.n * p;
    m.grid = cells <= static_cast<double>(1u << 22) && cost <= pair_cost;
  }

  if (m.grid) {
    m.cells = static_cast<std::size_t>(cells);
    std::size_t stride = 1;
    for (int k = 0; k < p; ++k) {
      m.categories.push_back(m.meta.kinds[static_cast<std::size_t>(k)].categories);
      m.strides.push_back(stride);
      stride *= static_cast<std::size_t>(m.categories.back());
    }
    m.sums.assign(2 * m.cells, 0.0);
    m.cell_of.resize(static_cast<std::size_t>(m.n));
    for (int i = 0; i < m.n; ++i) {
      std::size_t cell = 0;
      for (int k = 0; k < p; ++k) cell += static_cast<std::size_t>(x(i, k)) * m.strides[static_cast<std::size_t>(k)];
      m.cell_of[static_cast<std::size_t>(i)] = cell;
      m.sums[2 * cell] += u(i);
      m.sums[2 * cell + 1] += 1.0;
    }
    return;
  }

  for (int k = 0; k < p; ++k) {
    switch (m.meta.kinds[static_cast<std::size_t>(k)].tag) {
      case KindTag::Continuous: m.cont.push_back(static_cast<std::size_t>(k)); break;
      case KindTag::OrderedDiscrete: m.ord.push_back(static_cast<std::size_t>(k)); break;
      case KindTag::UnorderedDiscrete: m.unord.push_back(static_cast<std::size_t>(k)); break;
    }
  }
  auto pack = [&](const std::vector<std::size_t>& cols, std::vector<double>& out) {
    out.resize(static_cast<std::size_t>(m.n) * cols.size());
    for (int i = 0; i < m.n; ++i)
      for (std::size_t k = 0; k < cols.size(); ++k)
        out[static_cast<std::size_t>(i) * cols.size() + k] = x(i, static_cast<Eigen::Index>(cols[k]));
  };
  pack(m.cont, m.xc);
  pack(m.ord, m.xo);
  pack(m.unord, m.xu);
}

CvObjective::~CvObjective() = default;
CvObjective::CvObjective(CvObjective&&) noexcept = default;
CvObjective& CvObjective::operator=(CvObjective&&) noexcept = default;

double CvObjective::operator()(const BandwidthVector& bw) const {
  if (bw.values.size() != impl_->meta.size()) throw BackendError("loo_cv: bandwidth vector width mismatch");
  if (impl_->n < 2) return 0.0;
  return impl_->grid ? impl_->eval_grid(bw) : impl_->eval_pairwise(bw);
}

bool CvObjective::uses_grid() const { return impl_->grid; }
const KernelMeta& CvObjective::meta() const { return impl_->meta; }

double loo_cv(const Eigen::VectorXd& u, const Eigen::MatrixXd& x, const BandwidthVector& bw, const KernelMeta& meta) {
  return CvObjective(u, x, meta)(bw);
}

// ---------------------------------------------------------------------------

namespace {

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

struct Transform {
  const KernelMeta& meta;
  double h_min_factor;
  double h_max_factor;

  BandwidthVector to_bandwidths(std::span<const double> theta) const {
    BandwidthVector bw;
    bw.values.resize(theta.size());
    for (std::size_t k = 0; k < theta.size(); ++k) {
      if (meta.kinds[k].is_continuous()) {
        const double rel = std::clamp(std::exp(theta[k]), h_min_factor, h_max_factor);
        bw.values[k] = rel * meta.scales[k];
      } else {
        bw.values[k] = discrete_upper(meta.kinds[k]) * sigmoid(theta[k]);
      }
    }
    return bw;
  }

  double continuous_theta(double rel) const { return std::log(rel); }
  double discrete_theta(double frac) const { return logit(frac); }
};

}  // namespace

BandwidthFit select_bandwidths(const Eigen::VectorXd& u, const Eigen::MatrixXd& x, const KernelMeta& meta,
                               const OptimizerConfig& config, std::uint64_t seed) {
  const int n = static_cast<int>(x.rows());
  const std::size_t p = meta.size();
  if (n < config.min_n)
    throw BackendError("select_bandwidths: n = " + std::to_string(n) + " is below the floor of " +
                       std::to_string(config.min_n) + " rows");
  if (config.restarts < 1) throw ValidationError("select_bandwidths: need at least one start");

  Rng rng(seed);
  std::optional<CvObjective> objective;
  if (config.subsample && n > *config.subsample) {
    std::vector<int> rows(static_cast<std::size_t>(n));
    std::iota(rows.begin(), rows.end(), 0);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(static_cast<std::size_t>(*config.subsample));
    std::sort(rows.begin(), rows.end());
    Eigen::MatrixXd xs(static_cast<Eigen::Index>(rows.size()), x.cols());
    Eigen::VectorXd us(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      xs.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
      us(static_cast<Eigen::Index>(r)) = u(rows[r]);
    }
    objective.emplace(us, xs, meta);
  } else {
    objective.emplace(u, x, meta);
  }

  BandwidthFit fit;
  const Transform tr{meta, config.h_min_factor, config.h_max_factor};
  auto cv_theta = [&](std::span<const double> theta) { return (*objective)(tr.to_bandwidths(theta)); };

  // Start 0 is the all-smoothed-out corner; the rest are Latin-hypercube
  // draws, one stratum per start and coordinate.
  std::vector<std::vector<double>> starts;
  std::vector<double> corner(p);
  for (std::size_t k = 0; k < p; ++k)
    corner[k] = meta.kinds[k].is_continuous() ? tr.continuous_theta(1e3) : tr.discrete_theta(0.99);
  starts.push_back(corner);
  const int strata = config.restarts - 1;
  if (strata > 0) {
    std::vector<std::vector<int>> perm(p, std::vector<int>(static_cast<std::size_t>(strata)));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (auto& pk : perm) {
      std::iota(pk.begin(), pk.end(), 0);
      std::shuffle(pk.begin(), pk.end(), rng);
    }
    for (int r = 0; r < strata; ++r) {
      std::vector<double> theta(p);
      for (std::size_t k = 0; k < p; ++k) {
        const double frac = (perm[k][static_cast<std::size_t>(r)] + unif(rng)) / strata;
        if (meta.kinds[k].is_continuous())
          theta[k] = std::log(0.05) + frac * (std::log(5.0) - std::log(0.05));
        else
          theta[k] = tr.discrete_theta(0.02 + 0.96 * frac);
      }
      starts.push_back(std::move(theta));
    }
  }

  NelderMeadOptions nm;
  nm.rel_tol = config.rel_tol;
  nm.max_iter = config.max_iter;
  nm.initial_step = 1.0;

  double best = std::numeric_limits<double>::infinity();
  BandwidthVector best_bw;
  for (const auto& s : starts) {
    fit.start_cv.push_back(cv_theta(s));
    ++fit.evaluations;
    auto r = nelder_mead(cv_theta, s, nm);
    fit.evaluations += r.evaluations;
    if (r.value < best) {
      best = r.value;
      best_bw = tr.to_bandwidths(r.x);
    }
  }
  if (!std::isfinite(best)) throw BackendError("select_bandwidths: no admissible point with a finite CV value");

  // The transforms never reach the box edges; try each edge exactly and keep
  // it whenever the criterion does not get worse.
  for (std::size_t k = 0; k < p; ++k) {
    std::vector<double> candidates;
    if (meta.kinds[k].is_continuous())
      candidates = {config.h_max_factor * meta.scales[k]};
    else
      candidates = {discrete_upper(meta.kinds[k]), 0.0};
    for (double c : candidates) {
      BandwidthVector trial = best_bw;
      trial.values[k] = c;
      const double v = (*objective)(trial);
      ++fit.evaluations;
      if (v <= best) {
        best = v;
        best_bw = std::move(trial);
        break;
      }
    }
  }

  fit.bandwidths = std::move(best_bw);
  fit.cv = best;
  return fit;
}

IndexSet screen(const BandwidthVector& bw, const ThresholdPolicy& policy, const KernelMeta& meta) {
  if (bw.values.size() != meta.size()) throw BackendError("screen: bandwidth vector width mismatch");
  std::vector<int> keep;
  for (std::size_t k = 0; k < meta.size(); ++k)
    if (bw.values[k] < policy.threshold_for(meta, k)) keep.push_back(static_cast<int>(k));
  return IndexSet(std::move(keep));
}

std::string bandwidth_csv(std::span<const std::string> names, const BandwidthVector& bw, const ThresholdPolicy& policy,
                          const KernelMeta& meta) {
  const auto kept = screen(bw, policy, meta);
  std::string out = "column,kind,bandwidth,threshold,retained\n";
  for (std::size_t k = 0; k < meta.size(); ++k) {
    out += (k < names.size() ? names[k] : std::to_string(k + 1)) + "," + meta.kinds[k].to_string() + "," +
           io::format_double(bw.values[k]) + "," + io::format_double(policy.threshold_for(meta, k)) + "," +
           (kept.contains(static_cast<int>(k)) ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace confsel::kernel
