#include "pairgen/plans.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "pairgen/error.hpp"

namespace pairgen {

CandidatePool::CandidatePool(std::vector<Plan> representatives) : remaining_(std::move(representatives)) {
  std::set<int> ids;
  for (const auto& p : remaining_) {
    if (!ids.insert(p.id).second) throw Error(Errc::duplicate_id, "plan " + std::to_string(p.id));
  }
}

Plan CandidatePool::take(int plan_id) {
  auto it = std::find_if(remaining_.begin(), remaining_.end(), [&](const Plan& p) { return p.id == plan_id; });
  if (it == remaining_.end()) {
    throw Error(Errc::not_in_pool, "plan " + std::to_string(plan_id) + " is not among the remaining candidates");
  }
  Plan plan = *it;
  remaining_.erase(it);
  attempted_.push_back(plan);
  return plan;
}

CandidatePool pool_select(CandidatePool pool, const Plan& plan) {
  pool.take(plan.id);
  return pool;
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

std::vector<Plan> sample_plans(Gateway& gateway, const PromptLibrary& prompts, std::string_view description,
                               std::string_view reflection, std::size_t n, std::size_t batch_size,
                               double temperature, SampleStats* stats) {
  if (n < 1 || batch_size < 1 || batch_size > n) {
    throw Error(Errc::config_error, "plan sampling needs n >= 1 and 1 <= batch_size <= n");
  }
  std::vector<std::string> raw;
  auto request_batch = [&](std::size_t count) {
    ChatRequest req = prompts.render_plan(description, reflection, count, temperature);
    ChatResponse resp = gateway.complete(req);
    if (stats) {
      ++stats->requests;
      stats->prompts.push_back(req);
      stats->responses.push_back(resp.text);
    }
    try {
      for (auto& p : parse_plans(resp.text)) raw.push_back(std::move(p));
    } catch (const Error& e) {
      if (e.code() != Errc::no_plans_found) throw;
      spdlog::warn("plan batch produced no parsable plans");
    }
  };

  const std::size_t batches = (n + batch_size - 1) / batch_size;
  for (std::size_t b = 0; b < batches; ++b) request_batch(std::min(batch_size, n - b * batch_size));
  if (raw.empty()) request_batch(batch_size);
  if (raw.empty()) throw Error(Errc::no_plans_found, "no plans parsed after re-sampling");
  if (raw.size() > n) raw.resize(n);

  std::vector<Plan> plans;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (seen.insert(normalize_whitespace(raw[i])).second) {
      plans.push_back(Plan{static_cast<int>(i + 1), std::move(raw[i]), std::nullopt});
    }
  }
  return plans;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

namespace {

double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t nearest_center(const EmbeddingVector& p, const std::vector<EmbeddingVector>& centers) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.size(); ++c) {
    double d = squared_distance(p, centers[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

std::vector<EmbeddingVector> seed_plus_plus(std::span<const EmbeddingVector> points, std::size_t k,
                                            std::mt19937_64& rng) {
  const std::size_t m = points.size();
  std::vector<EmbeddingVector> centers;
  std::size_t first = std::min(m - 1, static_cast<std::size_t>(unit_draw(rng) * static_cast<double>(m)));
  centers.push_back(points[first]);
  std::vector<double> d2(m);
  for (std::size_t i = 0; i < m; ++i) d2[i] = squared_distance(points[i], centers[0]);
  while (centers.size() < k) {
    double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    double target = unit_draw(rng) * total;
    std::size_t pick = m;
    double cumulative = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (d2[i] <= 0.0) continue;
      cumulative += d2[i];
      if (cumulative > target) {
        pick = i;
        break;
      }
    }
    if (pick == m) {
      // Rounding left target at the very end: last point with positive weight.
      for (std::size_t i = m; i-- > 0;) {
        if (d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    }
    centers.push_back(points[pick]);
    for (std::size_t i = 0; i < m; ++i) d2[i] = std::min(d2[i], squared_distance(points[i], centers.back()));
  }
  return centers;
}

KMeansResult lloyd(std::span<const EmbeddingVector> points, std::vector<EmbeddingVector> centers, int max_iters) {
  const std::size_t m = points.size();
  const std::size_t k = centers.size();
  const std::size_t dim = points.front().size();
  std::vector<std::size_t> assignment(m, k);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t c = nearest_center(points[i], centers);
      if (c != assignment[i]) {
        assignment[i] = c;
        changed = true;
      }
    }
    // An emptied cluster takes the point farthest from its own centroid.
    for (std::size_t c = 0; c < k; ++c) {
      if (std::find(assignment.begin(), assignment.end(), c) != assignment.end()) continue;
      std::vector<std::size_t> sizes(k, 0);
      for (auto a : assignment) ++sizes[a];
      std::size_t far = m;
      double far_d = -1.0;
      for (std::size_t i = 0; i < m; ++i) {
        if (sizes[assignment[i]] < 2) continue;
        double d = squared_distance(points[i], centers[assignment[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far == m) break;
      assignment[far] = c;
      changed = true;
    }
    if (!changed && iter > 0) break;
    std::vector<EmbeddingVector> sums(k, EmbeddingVector(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < m; ++i) {
      auto& s = sums[assignment[i]];
      for (std::size_t d = 0; d < dim; ++d) s[d] += points[i][d];
      ++counts[assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t d = 0; d < dim; ++d) sums[c][d] /= static_cast<double>(counts[c]);
      centers[c] = std::move(sums[c]);
    }
  }
  KMeansResult r;
  r.assignment = std::move(assignment);
  r.centroids = std::move(centers);
  for (std::size_t i = 0; i < m; ++i) r.inertia += squared_distance(points[i], r.centroids[r.assignment[i]]);
  return r;
}

}  // namespace

KMeansResult kmeans(std::span<const EmbeddingVector> points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options) {
  if (points.empty()) throw Error(Errc::empty_input, "kmeans needs at least one point");
  if (k < 1) throw Error(Errc::config_error, "kmeans needs k >= 1");
  const std::size_t dim = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dim) throw Error(Errc::dimension_mismatch, "points have different dimensions");
  }
  std::set<EmbeddingVector> distinct(points.begin(), points.end());
  const std::size_t effective_k = std::min(k, distinct.size());

  std::mt19937_64 rng(seed);
  std::optional<KMeansResult> best;
  for (int run = 0; run < std::max(1, options.restarts); ++run) {
    KMeansResult r = lloyd(points, seed_plus_plus(points, effective_k, rng), options.max_iters);
    if (!best || r.inertia < best->inertia) best = std::move(r);
  }
  return std::move(*best);
}

std::vector<Plan> cluster_plans(std::span<const Plan> plans, std::size_t k, std::uint64_t seed,
                                const KMeansOptions& options) {
  if (plans.empty()) throw Error(Errc::empty_input, "no plans to cluster");
  std::vector<EmbeddingVector> points;
  for (const auto& p : plans) {
    if (!p.embedding) throw Error(Errc::missing_embedding, "plan " + std::to_string(p.id) + " has no embedding");
    points.push_back(*p.embedding);
  }
  KMeansResult km = kmeans(points, k, seed, options);

  std::vector<std::size_t> cluster_order;
  for (auto c : km.assignment) {
    if (std::find(cluster_order.begin(), cluster_order.end(), c) == cluster_order.end()) cluster_order.push_back(c);
  }
  std::vector<Plan> reps;
  for (auto c : cluster_order) {
    const Plan* best = nullptr;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < plans.size(); ++i) {
      if (km.assignment[i] != c) continue;
      double d = squared_distance(points[i], km.centroids[c]);
      if (d < best_d || (d == best_d && best && plans[i].id < best->id)) {
        best_d = d;
        best = &plans[i];
      }
    }
    reps.push_back(*best);
  }
  return reps;
}

}  // namespace pairgen
