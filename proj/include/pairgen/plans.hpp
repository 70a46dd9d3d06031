#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pairgen/gateway.hpp"
#include "pairgen/prompts.hpp"

namespace pairgen {

struct Plan {
  int id = 0;  // 1-based sampling order
  std::string text;
  std::optional<EmbeddingVector> embedding;

  bool operator==(const Plan&) const = default;
};

/// Un-attempted representatives plus the ones already handed out. A plan
/// leaves `remaining` at most once and never comes back.
class CandidatePool {
 public:
  CandidatePool() = default;
  explicit CandidatePool(std::vector<Plan> representatives);

  const std::vector<Plan>& remaining() const { return remaining_; }
  const std::vector<Plan>& attempted() const { return attempted_; }
  bool exhausted() const { return remaining_.empty(); }

  /// Moves the plan to `attempted` and returns it. Throws Error{not_in_pool}.
  Plan take(int plan_id);

 private:
  std::vector<Plan> remaining_;
  std::vector<Plan> attempted_;
};

CandidatePool pool_select(CandidatePool pool, const Plan& plan);

/// Collapses whitespace runs to one space and trims; the dedup key.
std::string normalize_whitespace(std::string_view text);

struct SampleStats {
  int requests = 0;
  std::vector<ChatRequest> prompts;
  std::vector<std::string> responses;
};

/// Issues ceil(n / batch_size) plan requests, keeps at most n parsed plans
/// and drops whitespace-normalized exact duplicates (first one wins). One
/// extra request is made if nothing parsed. Throws Error{no_plans_found}.
std::vector<Plan> sample_plans(Gateway& gateway, const PromptLibrary& prompts, std::string_view description,
                               std::string_view reflection, std::size_t n, std::size_t batch_size,
                               double temperature = kPlanTemperature, SampleStats* stats = nullptr);

struct KMeansOptions {
  int max_iters = 100;
  int restarts = 10;
};

struct KMeansResult {
  std::vector<std::size_t> assignment;  // point -> cluster
  std::vector<EmbeddingVector> centroids;
  double inertia = 0.0;
};

/// k-means++ seeding followed by Lloyd iterations, best of `restarts` runs
/// by inertia. k is clamped to the number of distinct points. Deterministic
/// for a given seed.
KMeansResult kmeans(std::span<const EmbeddingVector> points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options = {});

/// One centroid-nearest member per cluster (ties: lowest plan id), ordered by
/// the cluster of first appearance in `plans`.
std::vector<Plan> cluster_plans(std::span<const Plan> plans, std::size_t k, std::uint64_t seed,
                                const KMeansOptions& options = {});

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace pairgen
