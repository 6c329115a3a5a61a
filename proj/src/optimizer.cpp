#include "arp/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>

#include "arp/error.hpp"

namespace arp {

double SearchSpace::lower(int d) const {
  switch (d % 4) {
    case 2: return w_min;
    case 3: return h_min;
    default: return 0.0;
  }
}

double SearchSpace::upper(int d) const {
  switch (d % 4) {
    case 2: return w_max;
    case 3: return h_max;
    default: return 1.0;
  }
}

void SearchSpace::validate() const {
  if (n_patches < 1) throw InvalidCount("patch count must be >= 1");
  if (!(mpr > 0.0 && mpr <= 1.0)) throw InvalidArgument("mpr must lie in (0, 1]");
  if (!(w_min > 0.0 && w_min <= w_max && w_max <= 1.0)) throw InvalidArgument("invalid width bounds");
  if (!(h_min > 0.0 && h_min <= h_max && h_max <= 1.0)) throw InvalidArgument("invalid height bounds");
}

SearchSpace split_area(const SearchSpace& space, int n) {
  if (n < 1 || n > 5) throw InvalidCount("patch count must lie in [1, 5], got " + std::to_string(n));
  SearchSpace s = space;
  s.n_patches = n;
  return s;
}

namespace {

struct Box {
  double x, y, w, h;
  double u0() const { return x - 0.5 * w; }
  double u1() const { return x + 0.5 * w; }
  double v0() const { return y - 0.5 * h; }
  double v1() const { return y + 0.5 * h; }
};

void keep_inside(Box& b) {
  b.x = std::clamp(b.x, 0.5 * b.w, 1.0 - 0.5 * b.w);
  b.y = std::clamp(b.y, 0.5 * b.h, 1.0 - 0.5 * b.h);
}

bool overlap(const Box& a, const Box& b) {
  return a.u0() < b.u1() && b.u0() < a.u1() && a.v0() < b.v1() && b.v0() < a.v1();
}

// Moves b off a along the axis of least penetration.
void push_apart(const Box& a, Box& b) {
  const double ox = std::min(a.u1(), b.u1()) - std::max(a.u0(), b.u0());
  const double oy = std::min(a.v1(), b.v1()) - std::max(a.v0(), b.v0());
  const double gap = 1e-9;
  if (ox <= oy) {
    double dir = b.x >= a.x ? 1.0 : -1.0;
    if (dir > 0 && a.u1() + b.w > 1.0) dir = -1.0;
    else if (dir < 0 && a.u0() - b.w < 0.0) dir = 1.0;
    b.x += dir * (ox + gap);
  } else {
    double dir = b.y >= a.y ? 1.0 : -1.0;
    if (dir > 0 && a.v1() + b.h > 1.0) dir = -1.0;
    else if (dir < 0 && a.v0() - b.h < 0.0) dir = 1.0;
    b.y += dir * (oy + gap);
  }
  keep_inside(b);
}

bool any_overlap(const std::vector<Box>& boxes) {
  for (std::size_t i = 0; i < boxes.size(); ++i)
    for (std::size_t j = i + 1; j < boxes.size(); ++j)
      if (overlap(boxes[i], boxes[j])) return true;
  return false;
}

}  // namespace

std::vector<double> repair(const SearchSpace& space, std::vector<double> params) {
  if (static_cast<int>(params.size()) != space.dims())
    throw InvalidArgument("parameter vector has " + std::to_string(params.size()) + " entries, expected " +
                          std::to_string(space.dims()));
  const double budget = space.patch_budget();
  std::vector<Box> boxes;
  for (int i = 0; i < space.n_patches; ++i) {
    for (int k = 0; k < 4; ++k) {
      double& v = params[static_cast<std::size_t>(4 * i + k)];
      const int d = 4 * i + k;
      if (!std::isfinite(v)) v = 0.5 * (space.lower(d) + space.upper(d));
    }
    Box b{params[4 * i], params[4 * i + 1], std::clamp(params[4 * i + 2], 1e-6, 1.0),
          std::clamp(params[4 * i + 3], 1e-6, 1.0)};
    if (b.w * b.h > budget) {
      const double s = std::sqrt(budget / (b.w * b.h));
      b.w *= s;
      b.h *= s;
      // Guard against the product rounding up past the budget.
      while (b.w * b.h > budget) {
        b.w = std::nextafter(b.w, 0.0);
        b.h = std::nextafter(b.h, 0.0);
      }
    }
    keep_inside(b);
    boxes.push_back(b);
  }
  for (int sweep = 0; sweep < 50 && any_overlap(boxes); ++sweep)
    for (std::size_t i = 0; i < boxes.size(); ++i)
      for (std::size_t j = i + 1; j < boxes.size(); ++j)
        if (overlap(boxes[i], boxes[j])) push_apart(boxes[i], boxes[j]);
  if (any_overlap(boxes)) {
    // Fallback: one vertical strip per patch, aspect ratio kept.
    const double n = static_cast<double>(boxes.size());
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      Box& b = boxes[i];
      const double wmax = 1.0 / n - 1e-9;
      if (b.w > wmax) {
        b.h *= wmax / b.w;
        b.w = wmax;
      }
      b.x = (static_cast<double>(i) + 0.5) / n;
      keep_inside(b);
    }
  }
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    params[4 * i] = boxes[i].x;
    params[4 * i + 1] = boxes[i].y;
    params[4 * i + 2] = boxes[i].w;
    params[4 * i + 3] = boxes[i].h;
  }
  return params;
}

std::vector<double> decode(const SearchSpace& space, const std::vector<double>& z) {
  if (static_cast<int>(z.size()) != space.dims()) throw InvalidArgument("sampler vector size mismatch");
  const double budget = space.patch_budget();
  std::vector<double> p(z.size());
  for (std::size_t i = 0; i < z.size(); i += 4) {
    double w = std::isfinite(z[i + 2]) ? std::clamp(z[i + 2], 1e-6, 1.0) : space.w_min;
    double h = std::isfinite(z[i + 3]) ? std::clamp(z[i + 3], 1e-6, 1.0) : space.h_min;
    if (w * h > budget) {
      const double s = std::sqrt(budget / (w * h));
      w *= s;
      h *= s;
    }
    const double u = std::isfinite(z[i]) ? std::clamp(z[i], 0.0, 1.0) : 0.5;
    const double v = std::isfinite(z[i + 1]) ? std::clamp(z[i + 1], 0.0, 1.0) : 0.5;
    p[i] = 0.5 * w + u * (1.0 - w);
    p[i + 1] = 0.5 * h + v * (1.0 - h);
    p[i + 2] = w;
    p[i + 3] = h;
  }
  return repair(space, p);
}

PatchSet to_patch_set(const SearchSpace& space, const std::vector<double>& params) {
  if (static_cast<int>(params.size()) != space.dims()) throw InvalidArgument("parameter vector size mismatch");
  PatchSet set;
  set.mpr = space.mpr;
  for (int i = 0; i < space.n_patches; ++i)
    set.patches.push_back({params[4 * i], params[4 * i + 1], params[4 * i + 2], params[4 * i + 3], space.product});
  return set;
}

std::vector<double> to_params(const PatchSet& set) {
  std::vector<double> out;
  for (const auto& p : set.patches) out.insert(out.end(), {p.x, p.y, p.w, p.h});
  return out;
}

void TrialHistory::append(Trial t) { trials.push_back(std::move(t)); }

const Trial& TrialHistory::best() const {
  if (trials.empty()) throw InvalidArgument("empty trial history");
  std::size_t b = 0;
  for (std::size_t i = 1; i < trials.size(); ++i)
    if (trials[i].objective < trials[b].objective) b = i;
  return trials[b];
}

std::pair<std::vector<int>, std::vector<int>> TrialHistory::split() const {
  std::vector<int> order(trials.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return trials[static_cast<std::size_t>(a)].objective <
                                              trials[static_cast<std::size_t>(b)].objective; });
  const auto n_good = static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(trials.size())));
  std::vector<int> good(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_good));
  std::vector<int> bad(order.begin() + static_cast<std::ptrdiff_t>(n_good), order.end());
  return {good, bad};
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Truncated Gaussian log kernel.
double log_kernel(double x, double c, double h, double lo, double hi) {
  const double z = (x - c) / h;
  const double mass = normal_cdf((hi - c) / h) - normal_cdf((lo - c) / h);
  return -0.5 * z * z - std::log(std::sqrt(2.0 * std::numbers::pi) * h * mass);
}

double log_mean_exp(const std::vector<double>& t) {
  const double m = *std::max_element(t.begin(), t.end());
  double acc = 0.0;
  for (double v : t) acc += std::exp(v - m);
  return m + std::log(acc / static_cast<double>(t.size()));
}

}  // namespace

ParzenDensity ParzenDensity::fit(const std::vector<double>& samples, double lo, double hi) {
  if (samples.empty()) throw InvalidArgument("Parzen density needs at least one sample");
  ParzenDensity d;
  d.lo = lo;
  d.hi = hi;
  for (double s : samples) d.centers.push_back(std::clamp(s, lo, hi));
  const double n = static_cast<double>(d.centers.size());
  const double mean = std::accumulate(d.centers.begin(), d.centers.end(), 0.0) / n;
  double var = 0.0;
  for (double c : d.centers) var += (c - mean) * (c - mean);
  const double sd = d.centers.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  const double range = hi - lo;
  // Small sets get a wider floor; from 99 kernels on it is 1% of the range.
  const double floor = std::max(0.01, 1.0 / std::min(100.0, 1.0 + n)) * range;
  d.bandwidth = std::clamp(1.06 * sd * std::pow(n, -0.2), floor, range);
  return d;
}

double ParzenDensity::log_pdf(double x) const {
  if (x < lo || x > hi) return -std::numeric_limits<double>::infinity();
  std::vector<double> terms;
  terms.reserve(centers.size() + 1);
  for (double c : centers) terms.push_back(log_kernel(x, c, bandwidth, lo, hi));
  terms.push_back(log_kernel(x, 0.5 * (lo + hi), hi - lo, lo, hi));
  return log_mean_exp(terms);
}

double ParzenDensity::pdf(double x) const { return std::exp(log_pdf(x)); }

double ParzenDensity::sample(Rng& rng) const {
  const std::size_t k = rng.index(centers.size() + 1);
  // Index centers.size() is the prior component.
  const bool prior = k == centers.size();
  const double c = prior ? 0.5 * (lo + hi) : centers[k];
  const double h = prior ? hi - lo : bandwidth;
  for (int i = 0; i < 100; ++i) {
    const double x = c + h * rng.normal();
    if (x >= lo && x <= hi) return x;
  }
  return std::clamp(c, lo, hi);
}

namespace {

// Product-kernel mixture over whole trials plus a prior component of weight
// prior_weight (each trial weighs 1).
struct JointParzen {
  std::vector<ParzenDensity> dims;
  double prior_weight = 1.0;

  double log_pdf(const std::vector<double>& x) const {
    const std::size_t n = dims.front().centers.size();
    std::vector<double> terms(n + 1, 0.0);
    terms[n] = std::log(prior_weight);
    for (std::size_t d = 0; d < dims.size(); ++d) {
      const ParzenDensity& p = dims[d];
      if (x[d] < p.lo || x[d] > p.hi) return -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < n; ++k) terms[k] += log_kernel(x[d], p.centers[k], p.bandwidth, p.lo, p.hi);
      terms[n] += log_kernel(x[d], 0.5 * (p.lo + p.hi), p.hi - p.lo, p.lo, p.hi);
    }
    return log_mean_exp(terms) + std::log((n + 1.0) / (n + prior_weight));
  }

  std::vector<double> sample(Rng& rng) const {
    const std::size_t n = dims.front().centers.size();
    const double r = rng.uniform() * (static_cast<double>(n) + prior_weight);
    const std::size_t k = std::min(static_cast<std::size_t>(r), n);
    std::vector<double> x;
    for (const ParzenDensity& p : dims) {
      const bool prior = k == n;
      const double c = prior ? 0.5 * (p.lo + p.hi) : p.centers[k];
      const double h = prior ? p.hi - p.lo : p.bandwidth;
      double v = std::clamp(c, p.lo, p.hi);
      for (int i = 0; i < 100; ++i) {
        const double t = c + h * rng.normal();
        if (t >= p.lo && t <= p.hi) {
          v = t;
          break;
        }
      }
      x.push_back(v);
    }
    return x;
  }
};

}  // namespace

std::vector<double> tpe_propose(const TrialHistory& history, const SearchSpace& space, std::uint64_t seed,
                                const TpeOptions& options) {
  Rng rng(seed);
  const int dims = space.dims();
  std::vector<double> x(static_cast<std::size_t>(dims));
  if (static_cast<int>(history.size()) < options.n_startup || history.size() < 2) {
    for (int d = 0; d < dims; ++d) x[static_cast<std::size_t>(d)] = rng.uniform(space.lower(d), space.upper(d));
    return x;
  }
  TrialHistory h = history;
  h.gamma = options.gamma;
  auto [good, bad] = h.split();
  if (bad.empty()) bad = good;

  JointParzen l, g;
  l.prior_weight = g.prior_weight = options.prior_weight;
  for (int d = 0; d < dims; ++d) {
    const auto du = static_cast<std::size_t>(d);
    std::vector<double> gs, bs;
    for (int i : good) gs.push_back(history.trials[static_cast<std::size_t>(i)].sampled()[du]);
    for (int i : bad) bs.push_back(history.trials[static_cast<std::size_t>(i)].sampled()[du]);
    l.dims.push_back(ParzenDensity::fit(gs, space.lower(d), space.upper(d)));
    g.dims.push_back(ParzenDensity::fit(bs, space.lower(d), space.upper(d)));
  }

  double best_score = -std::numeric_limits<double>::infinity();
  std::vector<double> best;
  for (int c = 0; c < options.n_ei; ++c) {
    double score = 0.0;
    if (options.multivariate) {
      x = l.sample(rng);
      score = l.log_pdf(x) - g.log_pdf(x);
    } else {
      for (int d = 0; d < dims; ++d) {
        const auto du = static_cast<std::size_t>(d);
        x[du] = l.dims[du].sample(rng);
        score += l.dims[du].log_pdf(x[du]) - g.dims[du].log_pdf(x[du]);
      }
    }
    if (best.empty() || score > best_score) {
      best_score = score;
      best = x;
    }
  }
  return best;
}

std::vector<double> tpe_suggest(const TrialHistory& history, const SearchSpace& space, std::uint64_t seed,
                                const TpeOptions& options) {
  return decode(space, tpe_propose(history, space, seed, options));
}

ObjectiveEvaluator::ObjectiveEvaluator(const SceneConfig& scene, const Scorer& model, double alpha, int eot_n,
                                       std::uint64_t seed, const EotConfig& eot, const NightOptions& night,
                                       const MaterialRegistry& registry)
    : model_(&model), alpha_(alpha), seed_(seed), night_(night), true_class_(class_for_sign(scene.sign)) {
  if (eot_n < 1) throw InvalidArgument("eot_n must be >= 1");
  if (!std::isfinite(alpha)) throw InvalidArgument("alpha must be finite");
  for (int k = 0; k < eot_n; ++k)
    renderers_.push_back(std::make_unique<SceneRenderer>(
        apply_eot(scene, derive_seed(seed, {static_cast<std::uint64_t>(k)}), eot), registry));
}

ObjectiveValue ObjectiveEvaluator::operator()(const PatchSet& patches) const {
  patches.validate();
  ObjectiveValue v;
  for (const auto& r : renderers_) {
    v.attack_loss += confidence(*model_, r->render_night(patches, night_), true_class_);
    v.stealth_loss -= confidence(*model_, r->render_day(patches), true_class_);
  }
  const double n = static_cast<double>(renderers_.size());
  v.attack_loss /= n;
  v.stealth_loss /= n;
  v.objective = v.attack_loss + alpha_ * v.stealth_loss;
  return v;
}

ObjectiveValue objective(const PatchSet& patches, const SceneConfig& scene, const Scorer& model, double alpha,
                         int eot_n, std::uint64_t seed, const EotConfig& eot) {
  return ObjectiveEvaluator(scene, model, alpha, eot_n, seed, eot)(patches);
}

namespace {

Trial run_trial(const ObjectiveEvaluator& evaluate, const SearchSpace& space, int index, std::vector<double> raw) {
  Trial t;
  t.index = index;
  t.params = decode(space, raw);
  t.suggested = std::move(raw);
  const ObjectiveValue v = evaluate(to_patch_set(space, t.params));
  t.attack_loss = v.attack_loss;
  t.stealth_loss = v.stealth_loss;
  t.objective = v.objective;
  t.seed = evaluate.seed();
  t.eot_samples = evaluate.eot_n();
  return t;
}

}  // namespace

OptimizeResult optimize(const ObjectiveEvaluator& evaluate, const SearchSpace& space, std::uint64_t seed,
                        const OptimizeOptions& options) {
  space.validate();
  if (options.budget < options.tpe.n_startup)
    throw InvalidArgument("budget must be >= n_startup (" + std::to_string(options.tpe.n_startup) + ")");
  OptimizeResult res;
  res.history.gamma = options.tpe.gamma;
  res.history.n_startup = options.tpe.n_startup;

  const bool logging = !options.log_path.empty();
  if (logging && options.resume && std::filesystem::exists(options.log_path)) {
    TrialHistory old = read_trial_log(options.log_path, space.n_patches);
    for (auto& t : old.trials) {
      if (static_cast<int>(res.history.size()) >= options.budget) break;
      if (t.index != static_cast<int>(res.history.size())) throw IoError("trial log is not contiguous");
      if (t.seed != evaluate.seed()) throw InvalidArgument("trial log belongs to a different EoT seed");
      t.eot_samples = evaluate.eot_n();
      res.history.append(t);
    }
    write_trial_log(options.log_path, res.history, space.n_patches);
  } else if (logging) {
    write_trial_log(options.log_path, res.history, space.n_patches);
  }

  for (int i = static_cast<int>(res.history.size()); i < options.budget; ++i) {
    auto raw = tpe_propose(res.history, space, derive_seed(seed, {static_cast<std::uint64_t>(i)}), options.tpe);
    Trial t = run_trial(evaluate, space, i, std::move(raw));
    if (logging) append_trial_log(options.log_path, t, space.n_patches);
    res.history.append(std::move(t));
  }
  res.best = to_patch_set(space, res.history.best().params);
  return res;
}

std::vector<double> random_square(const SearchSpace& space, Rng& rng) {
  std::vector<double> z;
  const double hi = std::min(space.w_max, std::sqrt(space.patch_budget()));
  const double lo = std::min(space.w_min, hi);
  for (int i = 0; i < space.n_patches; ++i) {
    const double side = rng.uniform(lo, hi);
    const double u = rng.uniform();
    const double v = rng.uniform();
    z.insert(z.end(), {u, v, side, side});
  }
  return z;
}

OptimizeResult random_baseline(const ObjectiveEvaluator& evaluate, const SearchSpace& space, int budget,
                               std::uint64_t seed, const std::string& log_path) {
  space.validate();
  if (budget < 1) throw InvalidArgument("budget must be >= 1");
  OptimizeResult res;
  if (!log_path.empty()) write_trial_log(log_path, res.history, space.n_patches);
  for (int i = 0; i < budget; ++i) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(i), 0x52414e44ULL}));
    Trial t = run_trial(evaluate, space, i, random_square(space, rng));
    if (!log_path.empty()) append_trial_log(log_path, t, space.n_patches);
    res.history.append(std::move(t));
  }
  res.best = to_patch_set(space, res.history.best().params);
  return res;
}

double asr(const Scorer& model, const SceneConfig& scene, const PatchSet& patches, int trials, std::uint64_t seed,
           const NightOptions& night, const EotConfig& eot, const MaterialRegistry& registry) {
  if (trials < 1) throw InvalidArgument("asr needs at least one trial");
  const SignClass truth = class_for_sign(scene.sign);
  int hits = 0;
  for (int k = 0; k < trials; ++k) {
    const SceneRenderer r(apply_eot(scene, derive_seed(seed, {static_cast<std::uint64_t>(k)}), eot), registry);
    if (detect(model, r.render_night(patches, night), truth).attack_success) ++hits;
  }
  return static_cast<double>(hits) / trials;
}

double random_baseline_asr(const Scorer& model, const SceneConfig& scene, const SearchSpace& space, int instances,
                           std::uint64_t seed, const EotConfig& eot, const MaterialRegistry& registry) {
  if (instances < 1) throw InvalidArgument("need at least one instance");
  space.validate();
  const SignClass truth = class_for_sign(scene.sign);
  int hits = 0;
  for (int k = 0; k < instances; ++k) {
    const auto ku = static_cast<std::uint64_t>(k);
    Rng rng(derive_seed(seed, {ku, 1}));
    const PatchSet ps = to_patch_set(space, decode(space, random_square(space, rng)));
    const SceneRenderer r(apply_eot(scene, derive_seed(seed, {ku, 2}), eot), registry);
    if (detect(model, r.render_night(ps), truth).attack_success) ++hits;
  }
  return static_cast<double>(hits) / instances;
}

}  // namespace arp
