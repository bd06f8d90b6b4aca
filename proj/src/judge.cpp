#include "cjscore/judge.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "cjscore/btm.hpp"
#include "cjscore/error.hpp"
#include "cjscore/rng.hpp"
#include "httplib.h"
#include "json.hpp"

namespace cjscore {

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Url split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InvalidArgument("endpoint '" + url + "' has no scheme");
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw InvalidArgument("unsupported endpoint scheme '" + scheme + "'");
  const auto slash = url.find('/', scheme_end + 3);
  Url out;
  out.origin = url.substr(0, slash);
  out.path = slash == std::string::npos ? "" : url.substr(slash);
  if (out.path.empty() || out.path == "/") out.path = "/v1/chat/completions";
  return out;
}

class TokenBucket {
 public:
  explicit TokenBucket(double per_minute)
      : rate_(per_minute / 60.0), capacity_(std::max(1.0, rate_)), tokens_(capacity_),
        last_(std::chrono::steady_clock::now()) {}

  void acquire() {
    if (rate_ <= 0) return;
    std::unique_lock lock(mu_);
    for (;;) {
      const auto now = std::chrono::steady_clock::now();
      tokens_ = std::min(capacity_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
      last_ = now;
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      const auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
      lock.unlock();
      std::this_thread::sleep_for(wait);
      lock.lock();
    }
  }

 private:
  double rate_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mu_;
};

class LlmBackend : public JudgeBackend {
 public:
  explicit LlmBackend(LlmBackendConfig config)
      : config_(std::move(config)), url_(split_url(config_.endpoint)), bucket_(config_.requests_per_minute),
        jitter_(config_.jitter_seed) {
    if (config_.model.empty()) throw InvalidArgument("model name is required");
    if (config_.retry.max_attempts < 1) throw InvalidArgument("retry cap must be at least 1");
  }

  std::string backend_id() const override { return config_.model + "@" + config_.endpoint; }
  bool is_remote() const override { return true; }

  Completion complete(const PromptText& prompt) override {
    nlohmann::json body = {
        {"model", config_.model},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt.body}}})},
        {"temperature", config_.decode.temperature},
        {"max_tokens", config_.decode.max_tokens},
    };
    const std::string payload = body.dump();
    httplib::Headers headers;
    if (!config_.auth_token.empty()) headers.emplace("Authorization", "Bearer " + config_.auth_token);

    std::string last_error;
    for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
      bucket_.acquire();
      httplib::Client client(url_.origin);
      client.set_connection_timeout(config_.timeout);
      client.set_read_timeout(config_.timeout);
      client.set_write_timeout(config_.timeout);
      auto res = client.Post(url_.path, headers, payload, "application/json");
      std::optional<std::chrono::milliseconds> retry_after;
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
      } else if (res->status == 401 || res->status == 403) {
        throw AuthError("endpoint " + config_.endpoint + " rejected credentials (HTTP " +
                        std::to_string(res->status) + ")");
      } else if (res->status == 429 || res->status == 408 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        if (res->has_header("Retry-After")) {
          try {
            retry_after = std::chrono::seconds(std::stoi(res->get_header_value("Retry-After")));
          } catch (const std::exception&) {
          }
        }
      } else if (res->status != 200) {
        throw BackendUnavailable("endpoint " + config_.endpoint + " answered HTTP " + std::to_string(res->status) +
                                 ": " + res->body.substr(0, 300));
      } else {
        return {extract_content(res->body), attempt};
      }
      if (attempt < config_.retry.max_attempts) std::this_thread::sleep_for(backoff(attempt, retry_after));
    }
    throw BackendUnavailable("endpoint " + config_.endpoint + " failed after " +
                             std::to_string(config_.retry.max_attempts) + " attempts (" + last_error + ")");
  }

 private:
  std::string extract_content(const std::string& text) const {
    try {
      const auto j = nlohmann::json::parse(text);
      const auto& content = j.at("choices").at(0).at("message").at("content");
      return content.is_null() ? std::string() : content.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw BackendUnavailable("malformed completion from " + config_.endpoint + ": " + e.what());
    }
  }

  std::chrono::milliseconds backoff(int attempt, std::optional<std::chrono::milliseconds> hint) {
    const double base = static_cast<double>(config_.retry.base_delay.count());
    const double cap = static_cast<double>(config_.retry.max_delay.count());
    double delay = std::min(cap, base * std::ldexp(1.0, attempt - 1));
    {
      std::lock_guard lock(jitter_mu_);
      delay *= 0.5 + 0.5 * jitter_.uniform();
    }
    if (hint) delay = std::max(delay, std::min(cap, static_cast<double>(hint->count())));
    return std::chrono::milliseconds(static_cast<long long>(delay));
  }

  LlmBackendConfig config_;
  Url url_;
  TokenBucket bucket_;
  std::mutex jitter_mu_;
  CounterRng jitter_;
};

class SimulatedBackend : public JudgeBackend {
 public:
  SimulatedBackend(std::map<std::string, double> lambda, std::uint64_t seed, SimulationMode mode)
      : lambda_(std::move(lambda)), seed_(seed), mode_(mode) {}

  std::string backend_id() const override {
    return "simulated-" + std::string(to_string(mode_)) + "@seed" + std::to_string(seed_);
  }

  Completion complete(const PromptText& prompt) override {
    if (prompt.template_id != TemplateId::cj_compare || prompt.essay_ids.size() != 2) {
      throw InvalidArgument("simulated backend only answers comparison prompts");
    }
    const std::string& a = prompt.essay_ids[0];
    const std::string& b = prompt.essay_ids[1];
    const double la = lookup(a);
    const double lb = lookup(b);
    bool a_wins = false;
    if (mode_ == SimulationMode::argmax) {
      a_wins = la >= lb;
    } else {
      CounterRng rng(derive_key(seed_, {"simulate", a, b, prompt.trait_id, std::to_string(prompt.replicate)}));
      a_wins = rng.uniform() < predict_prob(la, lb);
    }
    return {std::string(canonical_verdict(a_wins ? Verdict::a : Verdict::b)), 1};
  }

 private:
  double lookup(const std::string& id) const {
    auto it = lambda_.find(id);
    if (it == lambda_.end()) throw InvalidArgument("simulated backend has no quality for essay '" + id + "'");
    return it->second;
  }

  std::map<std::string, double> lambda_;
  std::uint64_t seed_;
  SimulationMode mode_;
};

const TemplateSet& templates_of(const JudgeOptions& options) {
  return options.templates ? *options.templates : TemplateSet::builtin();
}

// Runs tasks [0, n) over `workers` threads. A task may throw
// BackendUnavailable (counted by the task itself); anything else stops the
// run and is rethrown.
void run_pool(int n, int workers, const std::function<void(int)>& task) {
  workers = std::clamp(workers, 1, std::max(1, n));
  std::atomic<int> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr fatal;
  std::mutex fatal_mu;
  auto loop = [&] {
    for (;;) {
      if (stop) return;
      const int i = next++;
      if (i >= n) return;
      try {
        task(i);
      } catch (...) {
        std::lock_guard lock(fatal_mu);
        if (!fatal) fatal = std::current_exception();
        stop = true;
        return;
      }
    }
  };
  if (workers == 1) {
    loop();
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w) threads.emplace_back(loop);
    for (auto& t : threads) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);
}

}  // namespace

std::unique_ptr<JudgeBackend> llm_backend(const LlmBackendConfig& config) {
  return std::make_unique<LlmBackend>(config);
}

std::string_view to_string(SimulationMode m) { return m == SimulationMode::sample ? "sample" : "argmax"; }

SimulationMode parse_simulation_mode(std::string_view text) {
  if (text == "sample") return SimulationMode::sample;
  if (text == "argmax") return SimulationMode::argmax;
  throw InvalidArgument("unknown simulation mode '" + std::string(text) + "' (expected sample|argmax)");
}

std::unique_ptr<JudgeBackend> simulated_backend(std::map<std::string, double> lambda, std::uint64_t seed,
                                                SimulationMode mode) {
  return std::make_unique<SimulatedBackend>(std::move(lambda), seed, mode);
}

JudgmentRecord judge_placed(JudgeBackend& backend, const RubricTrait& rubric, const Essay& essay_a,
                            const Essay& essay_b, JudgmentStore* store, const JudgeOptions& options,
                            int replicate) {
  if (essay_a.essay_id == essay_b.essay_id) {
    throw InvalidArgument("cannot compare essay '" + essay_a.essay_id + "' with itself");
  }
  PromptText prompt = build_cj_prompt(rubric, essay_a, essay_b, options.task, options.cj, templates_of(options));
  prompt.replicate = replicate;
  const std::string backend_id = backend.backend_id();
  if (store) {
    if (auto hit = store->find_judgment({prompt.content_hash, backend_id, replicate})) {
      hit->attempt_count = 0;
      return *hit;
    }
  }

  JudgmentRecord rec;
  rec.essay_a = essay_a.essay_id;
  rec.essay_b = essay_b.essay_id;
  rec.trait_id = rubric.trait_id;
  rec.prompt_hash = prompt.content_hash;
  rec.backend_id = backend_id;
  rec.rubric_type = rubric.rubric_type;
  rec.replicate = replicate;
  rec.verdict = JudgmentVerdict::failure;
  for (int ask = 0; ask <= std::max(0, options.parse_retries); ++ask) {
    const Completion c = backend.complete(prompt);
    rec.attempt_count += c.attempts;
    rec.raw_response = c.text;
    const auto cls = classify_cj_response(c.text);
    if (cls == CjResponseClass::unparsable) continue;
    rec.verdict = cls == CjResponseClass::a   ? JudgmentVerdict::a
                  : cls == CjResponseClass::b ? JudgmentVerdict::b
                                              : JudgmentVerdict::tie;
    break;
  }
  rec.timestamp = utc_timestamp();
  if (store) store->append(rec);
  return rec;
}

JudgmentRecord judge_pair(JudgeBackend& backend, const RubricTrait& rubric, const Essay& essay_x,
                          const Essay& essay_y, std::uint64_t position_seed, JudgmentStore* store,
                          const JudgeOptions& options, int replicate) {
  CounterRng rng(derive_key(position_seed, {"position", essay_x.essay_id, essay_y.essay_id, rubric.trait_id,
                                            std::to_string(replicate)}));
  const bool x_first = (rng.next_u64() & 1U) == 0;
  return x_first ? judge_placed(backend, rubric, essay_x, essay_y, store, options, replicate)
                 : judge_placed(backend, rubric, essay_y, essay_x, store, options, replicate);
}

RubricScoreRecord score_essay(JudgeBackend& backend, const RubricTrait& rubric, const Essay& essay,
                              JudgmentStore* store, const JudgeOptions& options) {
  const PromptText prompt = build_rubric_scoring_prompt(rubric, essay, options.task, templates_of(options));
  const std::string backend_id = backend.backend_id();
  if (store) {
    if (auto hit = store->find_rubric_score({prompt.content_hash, backend_id, 0})) {
      hit->attempt_count = 0;
      return *hit;
    }
  }

  RubricScoreRecord rec;
  rec.essay_id = essay.essay_id;
  rec.trait_id = rubric.trait_id;
  rec.prompt_hash = prompt.content_hash;
  rec.backend_id = backend_id;
  rec.rubric_type = rubric.rubric_type;
  int parse_failures = 0;
  int off_scale = 0;
  for (;;) {
    const Completion c = backend.complete(prompt);
    rec.attempt_count += c.attempts;
    rec.raw_response = c.text;
    try {
      const ScoreResponse parsed = parse_score_response(c.text, rubric.scale);
      rec.score = parsed.score;
      rec.explanation = parsed.explanation;
      break;
    } catch (const OutOfScale& e) {
      rec.explanation = e.what();
      if (++off_scale > 1) break;
    } catch (const ParseFailure& e) {
      rec.explanation = e.what();
      if (++parse_failures > options.parse_retries) break;
    }
  }
  rec.timestamp = utc_timestamp();
  if (store) store->append(rec);
  return rec;
}

JudgeRun judge_schedule(JudgeBackend& backend, const RubricTrait& rubric, std::span<const Essay> essays,
                        const PairSchedule& schedule, JudgmentStore* store, const DispatchOptions& options) {
  if (options.rounds < 1) throw InvalidArgument("rounds must be at least 1");
  std::map<std::string, const Essay*> by_id;
  for (const auto& e : essays) by_id[e.essay_id] = &e;
  auto essay = [&](const std::string& id) -> const Essay& {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw InvalidArgument("scheduled essay '" + id + "' is not in the sample");
    return *it->second;
  };

  struct Task {
    const Essay* a;
    const Essay* b;
    int replicate;
  };
  std::vector<Task> tasks;
  const int reps = options.rounds * std::max(1, schedule.repetitions);
  for (int r = 0; r < reps; ++r) {
    const auto first_as_a = balanced_positions(
        schedule.pairs.size(), derive_key(options.seed, {"round", std::to_string(r)}), rubric.trait_id);
    for (std::size_t i = 0; i < schedule.pairs.size(); ++i) {
      const Essay& x = essay(schedule.pairs[i].first);
      const Essay& y = essay(schedule.pairs[i].second);
      if (options.both_orders) {
        tasks.push_back({&x, &y, r});
        tasks.push_back({&y, &x, r});
      } else if (first_as_a[i]) {
        tasks.push_back({&x, &y, r});
      } else {
        tasks.push_back({&y, &x, r});
      }
    }
  }

  const int n = static_cast<int>(tasks.size());
  std::vector<std::optional<JudgmentRecord>> slots(tasks.size());
  std::atomic<int> unavailable{0};
  int done = 0;
  std::mutex progress_mu;
  run_pool(n, options.workers, [&](int i) {
    const Task& t = tasks[static_cast<std::size_t>(i)];
    try {
      slots[static_cast<std::size_t>(i)] = judge_placed(backend, rubric, *t.a, *t.b, store, options.judge, t.replicate);
    } catch (const BackendUnavailable&) {
      ++unavailable;
    }
    if (options.progress) {
      std::lock_guard lock(progress_mu);
      options.progress(++done, n);
    }
  });

  JudgeRun run;
  run.stats.tasks = n;
  run.stats.unavailable = unavailable;
  for (auto& s : slots) {
    if (!s) continue;
    run.stats.backend_calls += s->attempt_count;
    if (s->attempt_count == 0) ++run.stats.cache_hits;
    if (s->verdict == JudgmentVerdict::failure) ++run.stats.failures;
    if (s->verdict == JudgmentVerdict::tie) ++run.stats.ties;
    run.records.push_back(std::move(*s));
  }
  return run;
}

ScoreRun score_essays(JudgeBackend& backend, const RubricTrait& rubric, std::span<const Essay> essays,
                      JudgmentStore* store, const DispatchOptions& options) {
  const int n = static_cast<int>(essays.size());
  std::vector<std::optional<RubricScoreRecord>> slots(essays.size());
  std::atomic<int> unavailable{0};
  int done = 0;
  std::mutex progress_mu;
  run_pool(n, options.workers, [&](int i) {
    try {
      slots[static_cast<std::size_t>(i)] =
          score_essay(backend, rubric, essays[static_cast<std::size_t>(i)], store, options.judge);
    } catch (const BackendUnavailable&) {
      ++unavailable;
    }
    if (options.progress) {
      std::lock_guard lock(progress_mu);
      options.progress(++done, n);
    }
  });

  ScoreRun run;
  run.stats.tasks = n;
  run.stats.unavailable = unavailable;
  for (auto& s : slots) {
    if (!s) continue;
    run.stats.backend_calls += s->attempt_count;
    if (s->attempt_count == 0) ++run.stats.cache_hits;
    if (s->failed()) ++run.stats.failures;
    run.records.push_back(std::move(*s));
  }
  return run;
}

}  // namespace cjscore
