#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vnla/autodiff.hpp"
#include "vnla/config.hpp"
#include "vnla/env.hpp"
#include "vnla/language.hpp"
#include "vnla/oracle.hpp"

namespace vnla {

struct ModelConfig {
  int vocab_size = 0;
  int feature_dim = 64;
  int hidden = 64;
  int word_emb = 32;
  int nav_action_emb = 8;
  int ask_action_emb = 8;
  int budget_emb = 4;
  int coverage_dim = 3;
  int ask_hidden = 64;
  int ask_layers = 1;
  int budget_max = 4;  // embedding indices 0..budget_max, clamped
  double dropout = 0.0;

  static ModelConfig from_config(const RunConfig& cfg, int vocab_size);
};

// budget_max = ceil(l_max * tau / k) + 1
int budget_embedding_max(int l_max, double tau, int k);

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Adam moments plus the step counter; persisted so training can resume
// bit-exactly.
struct TrainerState {
  std::int64_t iteration = 0;
  std::vector<std::vector<double>> adam_m, adam_v;
};

// The navigation encoder-decoder (attention + coverage, two decode passes per
// step) and the feed-forward help-requesting network, over one ParamStore.
class AgentModel {
 public:
  AgentModel(ModelConfig cfg, Vocabulary vocab);

  const ModelConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }
  ad::ParamStore& params() { return params_; }
  const ad::ParamStore& params() const { return params_; }

  void init_params(Rng& rng) { params_.init(rng); }

  // One memory vector per token; encoder state starts at zero.
  std::vector<ad::Tape::Var> encode_goal(ad::Tape& tape, const std::vector<int>& tokens) const;

  struct DecodeState {
    ad::Tape::Var h = -1, c = -1;  // carried from pass 2 of the previous step
  };

  struct DecodeResult {
    ad::Tape::Var dist;   // 6-way navigation distribution
    ad::Tape::Var h_att;  // attended features
    ad::Tape::Var h_dec;  // decoder hidden state
    ad::Tape::Var alpha;  // attention weights over the memory
    DecodeState state;    // (h, c) after this pass
  };

  // One decode pass. `coverage` holds one scalar accumulator Var per memory
  // token; the caller updates it after pass 2 via update_coverage.
  DecodeResult decode_pass(ad::Tape& tape, const DecodeState& prev,
                           const std::vector<ad::Tape::Var>& memory,
                           const std::vector<ad::Tape::Var>& coverage,
                           std::span<const double> observation, NavAction prev_nav,
                           AskAction ask_action,
                           const std::vector<double>* dropout_mask = nullptr) const;

  std::vector<ad::Tape::Var> make_coverage(ad::Tape& tape, std::size_t tokens) const;
  void update_coverage(ad::Tape& tape, std::vector<ad::Tape::Var>& coverage,
                       ad::Tape::Var alpha) const;

  // Help-requesting forward pass. The nav-derived features arrive as plain
  // values, so no gradient can flow back into the navigation module; the
  // budget embedding is this network's own trainable input encoding.
  ad::Tape::Var ask_forward(ad::Tape& tape, std::span<const double> observation, int budget,
                            std::span<const double> tentative, std::span<const double> h_dec1,
                            std::span<const double> h_att1) const;

  ad::Tape::Var step_loss(ad::Tape& tape, ad::Tape::Var dist, int action_index) const;

  std::vector<double> sample_dropout_mask(Rng& rng) const;  // decoder input mask

  void save_checkpoint(const std::string& path, const nlohmann::ordered_json& config_echo,
                       const TrainerState* trainer = nullptr) const;
  static AgentModel load_checkpoint(const std::string& path, nlohmann::json* config_echo_out,
                                    TrainerState* trainer_out = nullptr);

  // Block ids (serialization and gradient-check order).
  struct Blocks {
    int word_emb, enc_wih, enc_whh, enc_b;
    int nav_emb, ask_emb;
    int dec_wih, dec_whh, dec_b;
    int attn_w, cov_w, comb_w, comb_b, out_nav;
    int budget_emb;
    std::vector<int> ask_w, ask_b;
    int out_ask;
  };
  const Blocks& blocks() const { return blocks_; }

 private:
  struct LstmBlocks {
    int wih, whh, b;
  };
  std::pair<ad::Tape::Var, ad::Tape::Var> lstm_step(ad::Tape& tape, const LstmBlocks& lstm,
                                                    ad::Tape::Var x, ad::Tape::Var h,
                                                    ad::Tape::Var c) const;

  ModelConfig cfg_;
  Vocabulary vocab_;
  ad::ParamStore params_;
  Blocks blocks_{};
};

// Maximum-probability action (ties -> lowest index) or a sample.
int select_action(std::span<const double> dist, bool sample, Rng* rng = nullptr);

}  // namespace vnla
