#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cjscore/core.hpp"
#include "json.hpp"

namespace cjscore {

// `adaptive` is reserved for adaptive comparative judgment and is rejected
// by make_schedule.
enum class PairStrategy { round_robin, random_k, adaptive };

std::string_view to_string(PairStrategy s);
PairStrategy parse_pair_strategy(std::string_view text);

// Unordered pair in canonical order: essay_id_less(first, second).
struct EssayPair {
  std::string first;
  std::string second;
  bool operator==(const EssayPair&) const = default;
};

struct PairSchedule {
  std::string trait_id;
  PairStrategy strategy = PairStrategy::round_robin;
  std::uint64_t seed = 0;
  int k = 0;
  int repetitions = 1;  // rounds over the same pair list
  std::vector<EssayPair> pairs;
};

std::vector<std::string> essay_ids(std::span<const Essay> essays);

// All n(n-1)/2 pairs, sorted.
PairSchedule round_robin_pairs(std::span<const std::string> ids, std::string_view trait_id = {});

// Every essay in at least k pairs, comparison graph connected. Redraws a
// bounded number of times, then joins leftover components with a random
// spanning tree over them.
PairSchedule random_k_pairs(std::span<const std::string> ids, int k, std::uint64_t seed,
                            std::string_view trait_id = {});

PairSchedule make_schedule(std::span<const std::string> ids, PairStrategy strategy, int k,
                           std::uint64_t seed, std::string_view trait_id = {});

bool is_connected(std::span<const std::string> ids, std::span<const EssayPair> pairs);

// Exactly floor(n/2) or ceil(n/2) trues in a seeded random order; entry i
// says whether pair i shows its first essay as "Essay A".
std::vector<bool> balanced_positions(std::size_t n, std::uint64_t seed, std::string_view trait_id);

nlohmann::json schedule_to_json(const PairSchedule& schedule);
PairSchedule schedule_from_json(const nlohmann::json& j);

}  // namespace cjscore
