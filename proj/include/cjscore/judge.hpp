#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cjscore/core.hpp"
#include "cjscore/pairing.hpp"
#include "cjscore/prompts.hpp"
#include "cjscore/records.hpp"
#include "cjscore/store.hpp"

namespace cjscore {

struct Completion {
  std::string text;
  int attempts = 1;  // transport-level tries, retries included
};

class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  // Throws BackendUnavailable once its retry budget is spent, AuthError on
  // rejected credentials.
  virtual Completion complete(const PromptText& prompt) = 0;
  virtual std::string backend_id() const = 0;
  virtual bool is_remote() const { return false; }
};

struct DecodeParams {
  double temperature = 0.0;
  int max_tokens = 512;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{20000};
};

struct LlmBackendConfig {
  // Full chat-completions URL. A bare scheme://host[:port] gets
  // /v1/chat/completions appended.
  std::string endpoint;
  std::string model;
  std::string auth_token;  // sent as a bearer token when nonempty
  DecodeParams decode;
  RetryPolicy retry;
  double requests_per_minute = 0.0;  // 0: no ceiling
  std::chrono::seconds timeout{120};
  std::uint64_t jitter_seed = 0;
};

// Chat-completions client. backend_id() is "model@endpoint".
std::unique_ptr<JudgeBackend> llm_backend(const LlmBackendConfig& config);

enum class SimulationMode { sample, argmax };

std::string_view to_string(SimulationMode m);
SimulationMode parse_simulation_mode(std::string_view text);

// Answers comparison prompts from planted qualities. In sample mode
// "Essay A" wins with probability predict_prob(lambda_A, lambda_B), drawn
// from a stream keyed by (seed, essay A, essay B, trait, replicate). In
// argmax mode the higher lambda wins and equal lambdas go to A.
// Rubric-scoring prompts are rejected.
std::unique_ptr<JudgeBackend> simulated_backend(std::map<std::string, double> lambda, std::uint64_t seed,
                                                SimulationMode mode);

// Test and scripting hook.
class CallbackBackend : public JudgeBackend {
 public:
  using Fn = std::function<std::string(const PromptText&)>;
  CallbackBackend(std::string id, Fn fn) : id_(std::move(id)), fn_(std::move(fn)) {}
  Completion complete(const PromptText& prompt) override { return {fn_(prompt), 1}; }
  std::string backend_id() const override { return id_; }

 private:
  std::string id_;
  Fn fn_;
};

struct JudgeOptions {
  int parse_retries = 2;
  std::string task;  // essay prompt shown to the model
  CjPromptOptions cj;
  const TemplateSet* templates = nullptr;  // null: built-ins
};

// Compares two essays with essay_a shown as "Essay A". A store hit returns
// the stored record with attempt_count 0 and no backend call; otherwise the
// record is appended before being returned. Unparsable answers are re-asked
// with the identical prompt up to parse_retries times and then recorded as
// failures.
JudgmentRecord judge_placed(JudgeBackend& backend, const RubricTrait& rubric, const Essay& essay_a,
                            const Essay& essay_b, JudgmentStore* store, const JudgeOptions& options = {},
                            int replicate = 0);

// Same, with positions decided by a coin flip seeded by (position_seed,
// pair, trait).
JudgmentRecord judge_pair(JudgeBackend& backend, const RubricTrait& rubric, const Essay& essay_x,
                          const Essay& essay_y, std::uint64_t position_seed, JudgmentStore* store,
                          const JudgeOptions& options = {}, int replicate = 0);

// Parse failures are retried like judge_placed; an off-scale score gets a
// single retry and then a failure record.
RubricScoreRecord score_essay(JudgeBackend& backend, const RubricTrait& rubric, const Essay& essay,
                              JudgmentStore* store, const JudgeOptions& options = {});

struct DispatchStats {
  int tasks = 0;
  int backend_calls = 0;  // transport attempts, retries included
  int cache_hits = 0;
  int failures = 0;     // unparsable after retries
  int ties = 0;
  int unavailable = 0;  // retry budget spent; nothing recorded
};

struct DispatchOptions {
  int workers = 1;
  int rounds = 1;          // repeat judgments of each pair, as replicates
  bool both_orders = false;
  std::uint64_t seed = 1;  // position assignment
  JudgeOptions judge;
  // Called after every finished task with (done, total); serialized.
  std::function<void(int, int)> progress;
};

struct JudgeRun {
  std::vector<JudgmentRecord> records;  // schedule order, unavailable calls omitted
  DispatchStats stats;
};

// One task per (round, pair), or two with both_orders. Positions within a
// round are split exactly in half (balanced_positions). Order of the result
// does not depend on the worker count. AuthError aborts the run.
JudgeRun judge_schedule(JudgeBackend& backend, const RubricTrait& rubric, std::span<const Essay> essays,
                        const PairSchedule& schedule, JudgmentStore* store, const DispatchOptions& options = {});

struct ScoreRun {
  std::vector<RubricScoreRecord> records;  // input order, unavailable calls omitted
  DispatchStats stats;
};

ScoreRun score_essays(JudgeBackend& backend, const RubricTrait& rubric, std::span<const Essay> essays,
                      JudgmentStore* store, const DispatchOptions& options = {});

}  // namespace cjscore
