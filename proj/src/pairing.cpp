#include "cjscore/pairing.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "cjscore/error.hpp"
#include "cjscore/rng.hpp"

namespace cjscore {

namespace {

constexpr int kMaxRedraws = 16;

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

std::vector<std::string> sorted_unique(std::span<const std::string> ids) {
  std::vector<std::string> v(ids.begin(), ids.end());
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return essay_id_less(a, b); });
  if (std::adjacent_find(v.begin(), v.end()) != v.end()) {
    throw InvalidArgument("duplicate essay id in pairing input");
  }
  return v;
}

EssayPair canonical(const std::string& a, const std::string& b) {
  return essay_id_less(a, b) ? EssayPair{a, b} : EssayPair{b, a};
}

void sort_pairs(std::vector<EssayPair>& pairs) {
  std::sort(pairs.begin(), pairs.end(), [](const EssayPair& x, const EssayPair& y) {
    if (x.first != y.first) return essay_id_less(x.first, y.first);
    return essay_id_less(x.second, y.second);
  });
}

}  // namespace

std::string_view to_string(PairStrategy s) {
  switch (s) {
    case PairStrategy::round_robin: return "round_robin";
    case PairStrategy::random_k: return "random_k";
    case PairStrategy::adaptive: return "adaptive";
  }
  return "round_robin";
}

PairStrategy parse_pair_strategy(std::string_view text) {
  if (text == "round_robin" || text == "round-robin") return PairStrategy::round_robin;
  if (text == "random_k" || text == "random-k") return PairStrategy::random_k;
  if (text == "adaptive") return PairStrategy::adaptive;
  throw InvalidArgument("unknown pairing strategy '" + std::string(text) + "'");
}

std::vector<std::string> essay_ids(std::span<const Essay> essays) {
  std::vector<std::string> ids;
  ids.reserve(essays.size());
  for (const auto& e : essays) ids.push_back(e.essay_id);
  return ids;
}

PairSchedule round_robin_pairs(std::span<const std::string> ids, std::string_view trait_id) {
  const auto v = sorted_unique(ids);
  if (v.size() < 2) throw InvalidArgument("round robin needs at least 2 essays");
  PairSchedule s;
  s.trait_id = std::string(trait_id);
  s.strategy = PairStrategy::round_robin;
  s.k = static_cast<int>(v.size()) - 1;
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) s.pairs.push_back({v[i], v[j]});
  }
  return s;
}

PairSchedule random_k_pairs(std::span<const std::string> ids, int k, std::uint64_t seed,
                            std::string_view trait_id) {
  const auto v = sorted_unique(ids);
  const std::size_t n = v.size();
  if (n < 2) throw InvalidArgument("random_k pairing needs at least 2 essays");
  if (k < 1 || static_cast<std::size_t>(k) > n - 1) {
    throw InvalidArgument("k must be in [1, " + std::to_string(n - 1) + "], got " + std::to_string(k));
  }

  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    edges.clear();
    std::vector<std::size_t> degree(n, 0);
    CounterRng rng(derive_key(seed, {"random_k", trait_id, std::to_string(attempt)}));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    for (std::size_t i : order) {
      while (degree[i] < static_cast<std::size_t>(k)) {
        std::vector<std::size_t> candidates;
        for (std::size_t j = 0; j < n; ++j) {
          if (j != i && !edges.contains({std::min(i, j), std::max(i, j)})) candidates.push_back(j);
        }
        // prefer partners that still need comparisons
        std::vector<std::size_t> needy;
        for (std::size_t j : candidates) {
          if (degree[j] < static_cast<std::size_t>(k)) needy.push_back(j);
        }
        const auto& pool = needy.empty() ? candidates : needy;
        const std::size_t j = pool[rng.below(pool.size())];
        edges.insert({std::min(i, j), std::max(i, j)});
        ++degree[i];
        ++degree[j];
      }
    }
    UnionFind uf(n);
    for (auto [a, b] : edges) uf.unite(a, b);
    std::size_t roots = 0;
    for (std::size_t i = 0; i < n; ++i) roots += uf.find(i) == i;
    if (roots == 1) break;
    if (attempt + 1 == kMaxRedraws) {
      // join components with a random spanning tree over them
      std::vector<std::vector<std::size_t>> comps;
      std::vector<std::size_t> comp_of(n, SIZE_MAX);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = uf.find(i);
        if (comp_of[r] == SIZE_MAX) {
          comp_of[r] = comps.size();
          comps.emplace_back();
        }
        comps[comp_of[r]].push_back(i);
      }
      CounterRng tree_rng(derive_key(seed, {"random_k_tree", trait_id}));
      std::vector<std::size_t> corder(comps.size());
      std::iota(corder.begin(), corder.end(), 0);
      shuffle(corder, tree_rng);
      for (std::size_t c = 1; c < corder.size(); ++c) {
        const auto& joined = comps[corder[tree_rng.below(c)]];
        const auto& fresh = comps[corder[c]];
        const std::size_t a = joined[tree_rng.below(joined.size())];
        const std::size_t b = fresh[tree_rng.below(fresh.size())];
        edges.insert({std::min(a, b), std::max(a, b)});
      }
    }
  }

  PairSchedule s;
  s.trait_id = std::string(trait_id);
  s.strategy = PairStrategy::random_k;
  s.seed = seed;
  s.k = k;
  for (auto [a, b] : edges) s.pairs.push_back(canonical(v[a], v[b]));
  sort_pairs(s.pairs);
  return s;
}

PairSchedule make_schedule(std::span<const std::string> ids, PairStrategy strategy, int k,
                           std::uint64_t seed, std::string_view trait_id) {
  switch (strategy) {
    case PairStrategy::round_robin: {
      auto s = round_robin_pairs(ids, trait_id);
      s.seed = seed;
      return s;
    }
    case PairStrategy::random_k: return random_k_pairs(ids, k, seed, trait_id);
    case PairStrategy::adaptive: break;
  }
  throw InvalidArgument("adaptive pairing is not available; use round_robin or random_k");
}

bool is_connected(std::span<const std::string> ids, std::span<const EssayPair> pairs) {
  if (ids.empty()) return true;
  std::vector<std::string> v(ids.begin(), ids.end());
  std::sort(v.begin(), v.end());
  auto index = [&](const std::string& id) -> std::size_t {
    auto it = std::lower_bound(v.begin(), v.end(), id);
    if (it == v.end() || *it != id) throw InvalidArgument("pair names unknown essay '" + id + "'");
    return static_cast<std::size_t>(it - v.begin());
  };
  UnionFind uf(v.size());
  for (const auto& p : pairs) uf.unite(index(p.first), index(p.second));
  const std::size_t root = uf.find(0);
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (uf.find(i) != root) return false;
  }
  return true;
}

std::vector<bool> balanced_positions(std::size_t n, std::uint64_t seed, std::string_view trait_id) {
  std::vector<bool> flags(n, false);
  for (std::size_t i = 0; i < n / 2; ++i) flags[i] = true;
  if (n % 2 == 1) {
    CounterRng odd(derive_key(seed, {"positions_odd", trait_id}));
    flags[n / 2] = odd.below(2) == 0;
  }
  CounterRng rng(derive_key(seed, {"positions", trait_id}));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    const bool tmp = flags[i - 1];
    flags[i - 1] = flags[j];
    flags[j] = tmp;
  }
  return flags;
}

nlohmann::json schedule_to_json(const PairSchedule& s) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : s.pairs) pairs.push_back({p.first, p.second});
  return nlohmann::json{{"trait_id", s.trait_id},     {"strategy", to_string(s.strategy)},
                        {"seed", s.seed},             {"k", s.k},
                        {"repetitions", s.repetitions}, {"pairs", std::move(pairs)}};
}

PairSchedule schedule_from_json(const nlohmann::json& j) {
  PairSchedule s;
  try {
    s.trait_id = j.at("trait_id").get<std::string>();
    s.strategy = parse_pair_strategy(j.at("strategy").get<std::string>());
    s.seed = j.at("seed").get<std::uint64_t>();
    s.k = j.at("k").get<int>();
    s.repetitions = j.at("repetitions").get<int>();
    for (const auto& p : j.at("pairs")) {
      s.pairs.push_back({p.at(0).get<std::string>(), p.at(1).get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed schedule JSON: ") + e.what());
  }
  return s;
}

}  // namespace cjscore
