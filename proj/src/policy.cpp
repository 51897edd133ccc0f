#include "vnla/policy.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace vnla {

int budget_embedding_max(int l_max, double tau, int k) {
  return static_cast<int>(std::ceil(l_max * tau / k)) + 1;
}

ModelConfig ModelConfig::from_config(const RunConfig& cfg, int vocab_size) {
  ModelConfig m;
  m.vocab_size = vocab_size;
  m.feature_dim = cfg.get_int("env.feature_dim");
  m.hidden = cfg.get_int("policy.hidden_size");
  m.word_emb = cfg.get_int("policy.word_emb");
  m.nav_action_emb = cfg.get_int("policy.nav_action_emb");
  m.ask_action_emb = cfg.get_int("policy.ask_action_emb");
  m.budget_emb = cfg.get_int("policy.budget_emb");
  m.coverage_dim = cfg.get_int("policy.coverage_dim");
  m.ask_hidden = cfg.get_int("policy.ask_hidden");
  m.ask_layers = cfg.get_int("policy.ask_layers");
  m.budget_max = budget_embedding_max(cfg.get_int("eval.l_max"), cfg.get_double("training.tau"),
                                      cfg.get_int("training.k"));
  m.dropout = cfg.get_double("policy.dropout");
  return m;
}

AgentModel::AgentModel(ModelConfig cfg, Vocabulary vocab)
    : cfg_(cfg), vocab_(std::move(vocab)) {
  const int H = cfg_.hidden;
  const int dec_in = cfg_.feature_dim + cfg_.nav_action_emb + cfg_.ask_action_emb;

  blocks_.word_emb = params_.add("word_emb", cfg_.vocab_size, cfg_.word_emb);
  blocks_.enc_wih = params_.add("enc.w_ih", 4 * H, cfg_.word_emb);
  blocks_.enc_whh = params_.add("enc.w_hh", 4 * H, H);
  blocks_.enc_b = params_.add("enc.b", 4 * H);
  blocks_.nav_emb = params_.add("nav_action_emb", kNavActionCount + 1, cfg_.nav_action_emb);
  blocks_.ask_emb = params_.add("ask_action_emb", kAskActionCount + 1, cfg_.ask_action_emb);
  blocks_.dec_wih = params_.add("dec.w_ih", 4 * H, dec_in);
  blocks_.dec_whh = params_.add("dec.w_hh", 4 * H, H);
  blocks_.dec_b = params_.add("dec.b", 4 * H);
  blocks_.attn_w = params_.add("attn.w", H, H);
  blocks_.cov_w = params_.add("attn.w_cov", cfg_.coverage_dim);
  blocks_.comb_w = params_.add("attn.w_comb", H, 2 * H);
  blocks_.comb_b = params_.add("attn.b_comb", H);
  blocks_.out_nav = params_.add("out.nav", kNavActionCount, H);
  blocks_.budget_emb = params_.add("budget_emb", cfg_.budget_max + 1, cfg_.budget_emb);

  int ask_in = cfg_.feature_dim + cfg_.budget_emb + kNavActionCount + 2 * H;
  for (int l = 0; l < cfg_.ask_layers; ++l) {
    blocks_.ask_w.push_back(params_.add("ask.w" + std::to_string(l), cfg_.ask_hidden, ask_in));
    blocks_.ask_b.push_back(params_.add("ask.b" + std::to_string(l), cfg_.ask_hidden));
    ask_in = cfg_.ask_hidden;
  }
  blocks_.out_ask = params_.add("out.ask", kAskActionCount, ask_in);
}

std::pair<ad::Tape::Var, ad::Tape::Var> AgentModel::lstm_step(ad::Tape& tape,
                                                              const LstmBlocks& lstm,
                                                              ad::Tape::Var x, ad::Tape::Var h,
                                                              ad::Tape::Var c) const {
  const int H = cfg_.hidden;
  const auto z = tape.add(tape.add(tape.matvec(lstm.wih, x), tape.matvec(lstm.whh, h)),
                          tape.param(lstm.b));
  const auto gi = tape.sigmoid(tape.slice(z, 0, H));
  const auto gf = tape.sigmoid(tape.slice(z, H, H));
  const auto gg = tape.tanh(tape.slice(z, 2 * H, H));
  const auto go = tape.sigmoid(tape.slice(z, 3 * H, H));
  const auto c_next = tape.add(tape.mul(gf, c), tape.mul(gi, gg));
  const auto h_next = tape.mul(go, tape.tanh(c_next));
  return {h_next, c_next};
}

std::vector<ad::Tape::Var> AgentModel::encode_goal(ad::Tape& tape,
                                                   const std::vector<int>& tokens) const {
  if (tokens.empty()) throw std::invalid_argument("encode_goal: empty token sequence");
  const LstmBlocks enc{blocks_.enc_wih, blocks_.enc_whh, blocks_.enc_b};
  ad::Tape::Var h = tape.zeros(cfg_.hidden);
  ad::Tape::Var c = tape.zeros(cfg_.hidden);
  std::vector<ad::Tape::Var> memory;
  memory.reserve(tokens.size());
  for (int tok : tokens) {
    const auto x = tape.param_row(blocks_.word_emb, tok);
    std::tie(h, c) = lstm_step(tape, enc, x, h, c);
    memory.push_back(h);
  }
  return memory;
}

std::vector<ad::Tape::Var> AgentModel::make_coverage(ad::Tape& tape, std::size_t tokens) const {
  std::vector<ad::Tape::Var> coverage(tokens);
  for (auto& c : coverage) c = tape.scalar_input(0.0);
  return coverage;
}

void AgentModel::update_coverage(ad::Tape& tape, std::vector<ad::Tape::Var>& coverage,
                                 ad::Tape::Var alpha) const {
  for (std::size_t j = 0; j < coverage.size(); ++j) {
    coverage[j] = tape.add(coverage[j], tape.pick(alpha, static_cast<int>(j)));
  }
}

AgentModel::DecodeResult AgentModel::decode_pass(
    ad::Tape& tape, const DecodeState& prev, const std::vector<ad::Tape::Var>& memory,
    const std::vector<ad::Tape::Var>& coverage, std::span<const double> observation,
    NavAction prev_nav, AskAction ask_action, const std::vector<double>* dropout_mask) const {
  if (memory.empty()) throw std::invalid_argument("decode_pass: empty memory");
  if (static_cast<int>(observation.size()) != cfg_.feature_dim) {
    throw std::logic_error("decode_pass: observation dimension mismatch");
  }

  const std::array<ad::Tape::Var, 3> parts = {
      tape.input(observation),
      tape.param_row(blocks_.nav_emb, static_cast<int>(prev_nav)),
      tape.param_row(blocks_.ask_emb, static_cast<int>(ask_action))};
  ad::Tape::Var x = tape.concat(parts);
  if (dropout_mask != nullptr) x = tape.mul(x, tape.input(*dropout_mask));

  DecodeState state = prev;
  if (state.h < 0) {
    state.h = tape.zeros(cfg_.hidden);
    state.c = tape.zeros(cfg_.hidden);
  }
  const LstmBlocks dec{blocks_.dec_wih, blocks_.dec_whh, blocks_.dec_b};
  auto [h, c] = lstm_step(tape, dec, x, state.h, state.c);

  // Multiplicative attention with the coverage feature added to each score.
  const auto query = tape.matvec_t(blocks_.attn_w, h);
  const auto w_cov_sum = tape.sum(tape.param(blocks_.cov_w));
  std::vector<ad::Tape::Var> scores(memory.size());
  for (std::size_t j = 0; j < memory.size(); ++j) {
    scores[j] = tape.add(tape.dot(query, memory[j]), tape.mul(w_cov_sum, coverage[j]));
  }
  const auto alpha = tape.softmax(tape.pack(scores));
  const auto context = tape.weighted_sum(alpha, memory);
  const std::array<ad::Tape::Var, 2> hc = {h, context};
  const auto h_att = tape.tanh(
      tape.add(tape.matvec(blocks_.comb_w, tape.concat(hc)), tape.param(blocks_.comb_b)));
  const auto dist = tape.softmax(tape.matvec(blocks_.out_nav, h_att));

  DecodeResult out;
  out.dist = dist;
  out.h_att = h_att;
  out.h_dec = h;
  out.alpha = alpha;
  out.state = {h, c};
  return out;
}

ad::Tape::Var AgentModel::ask_forward(ad::Tape& tape, std::span<const double> observation,
                                      int budget, std::span<const double> tentative,
                                      std::span<const double> h_dec1,
                                      std::span<const double> h_att1) const {
  const int idx = std::clamp(budget, 0, cfg_.budget_max);
  const std::array<ad::Tape::Var, 5> parts = {
      tape.input(observation), tape.param_row(blocks_.budget_emb, idx), tape.input(tentative),
      tape.input(h_dec1), tape.input(h_att1)};
  ad::Tape::Var h = tape.concat(parts);
  for (std::size_t l = 0; l < blocks_.ask_w.size(); ++l) {
    h = tape.relu(tape.add(tape.matvec(blocks_.ask_w[l], h), tape.param(blocks_.ask_b[l])));
  }
  return tape.softmax(tape.matvec(blocks_.out_ask, h));
}

ad::Tape::Var AgentModel::step_loss(ad::Tape& tape, ad::Tape::Var dist, int action_index) const {
  return tape.nll(dist, action_index);
}

std::vector<double> AgentModel::sample_dropout_mask(Rng& rng) const {
  const int len = cfg_.feature_dim + cfg_.nav_action_emb + cfg_.ask_action_emb;
  std::vector<double> mask(static_cast<std::size_t>(len), 1.0);
  if (cfg_.dropout <= 0.0) return mask;
  const double keep = 1.0 - cfg_.dropout;
  for (auto& m : mask) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return mask;
}

int select_action(std::span<const double> dist, bool sample, Rng* rng) {
  if (sample) {
    if (rng == nullptr) throw std::invalid_argument("select_action: sampling needs an rng");
    const double u = rng->uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
      acc += dist[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(dist.size()) - 1;
  }
  int best = 0;
  for (std::size_t i = 1; i < dist.size(); ++i) {
    if (dist[i] > dist[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

namespace {

constexpr char kMagic[4] = {'V', 'N', 'L', 'A'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void write_doubles(std::ostream& out, const std::vector<double>& v) {
  write_u64(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::string read_string(std::istream& in) {
  std::string s(read_u64(in), '\0');
  in.read(s.data(), static_cast<std::streamsize>(s.size()));
  return s;
}
std::vector<double> read_doubles(std::istream& in) {
  std::vector<double> v(read_u64(in));
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
  return v;
}

}  // namespace

void AgentModel::save_checkpoint(const std::string& path, const nlohmann::ordered_json& config_echo,
                                 const TrainerState* trainer) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_string(out, config_echo.dump());
  write_u64(out, static_cast<std::uint64_t>(vocab_.size()));
  for (const auto& tok : vocab_.tokens()) write_string(out, tok);
  write_u64(out, static_cast<std::uint64_t>(params_.count()));
  for (int i = 0; i < params_.count(); ++i) {
    const auto& b = params_.block(i);
    write_string(out, b.name);
    write_u32(out, static_cast<std::uint32_t>(b.rows));
    write_u32(out, static_cast<std::uint32_t>(b.cols));
    write_doubles(out, b.w);
  }
  out.put(trainer != nullptr ? 1 : 0);
  if (trainer != nullptr) {
    write_u64(out, static_cast<std::uint64_t>(trainer->iteration));
    for (int i = 0; i < params_.count(); ++i) {
      write_doubles(out, trainer->adam_m[static_cast<std::size_t>(i)]);
      write_doubles(out, trainer->adam_v[static_cast<std::size_t>(i)]);
    }
  }
  if (!out) throw CheckpointError("failed writing checkpoint: " + path);
}

AgentModel AgentModel::load_checkpoint(const std::string& path, nlohmann::json* config_echo_out,
                                       TrainerState* trainer_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw CheckpointError("not a checkpoint file: " + path);
  }
  if (read_u32(in) != kVersion) throw CheckpointError("unsupported checkpoint version: " + path);
  const auto echo = nlohmann::json::parse(read_string(in));
  if (config_echo_out != nullptr) *config_echo_out = echo;

  std::vector<std::string> tokens(read_u64(in));
  for (auto& t : tokens) t = read_string(in);
  const int vocab_size = static_cast<int>(tokens.size());
  const RunConfig cfg = RunConfig::from_echo(echo);
  AgentModel model(ModelConfig::from_config(cfg, vocab_size),
                   Vocabulary::from_tokens(std::move(tokens)));

  const auto block_count = read_u64(in);
  if (block_count != static_cast<std::uint64_t>(model.params_.count())) {
    throw CheckpointError("checkpoint/config mismatch: block count in " + path);
  }
  for (int i = 0; i < model.params_.count(); ++i) {
    auto& b = model.params_.block(i);
    const std::string name = read_string(in);
    const auto rows = read_u32(in);
    const auto cols = read_u32(in);
    if (name != b.name || static_cast<int>(rows) != b.rows || static_cast<int>(cols) != b.cols) {
      throw CheckpointError("checkpoint/config mismatch at block '" + name + "' in " + path);
    }
    b.w = read_doubles(in);
    if (static_cast<int>(b.w.size()) != b.size()) {
      throw CheckpointError("truncated checkpoint: " + path);
    }
  }
  const int has_trainer = in.get();
  if (has_trainer == 1 && trainer_out != nullptr) {
    trainer_out->iteration = static_cast<std::int64_t>(read_u64(in));
    trainer_out->adam_m.resize(static_cast<std::size_t>(model.params_.count()));
    trainer_out->adam_v.resize(static_cast<std::size_t>(model.params_.count()));
    for (int i = 0; i < model.params_.count(); ++i) {
      trainer_out->adam_m[static_cast<std::size_t>(i)] = read_doubles(in);
      trainer_out->adam_v[static_cast<std::size_t>(i)] = read_doubles(in);
    }
  }
  if (!in) throw CheckpointError("truncated checkpoint: " + path);
  return model;
}

}  // namespace vnla
