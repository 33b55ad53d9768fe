#include "shadow/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <omp.h>

#include "json_util.hpp"

namespace shadow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kTrainerStream = 1ull << 40;
constexpr std::uint64_t kInitStream = (1ull << 40) + 1;

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

// ---- metrics CSV ----------------------------------------------------------

std::string metrics_columns() {
  return "iter,env_steps,success_rate,mean_ep_len,mean_r_task,mean_r_reg,mean_r_safety,loss_surrogate,loss_v1,"
         "loss_v2,loss_v3,approx_kl,lr,max_joint_acc";
}

std::string metrics_header() { return std::string(kMetricsSchemaLine) + "\n" + metrics_columns() + "\n"; }

std::string format_metrics_row(const IterationMetrics& m) {
  std::ostringstream os;
  os << m.iter << ',' << m.env_steps;
  for (double v : {m.success_rate, m.mean_ep_len, m.mean_r_task, m.mean_r_reg, m.mean_r_safety, m.loss_surrogate,
                   m.loss_v1, m.loss_v2, m.loss_v3, m.approx_kl, m.lr, m.max_joint_acc}) {
    os << ',' << fmt(v);
  }
  os << '\n';
  return os.str();
}

std::vector<IterationMetrics> read_metrics_csv(std::istream& in, const std::string& source) {
  std::vector<IterationMetrics> rows;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) -> SchemaError {
    return SchemaError(source + ":" + std::to_string(lineno), what);
  };
  bool schema = false;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!schema) {
      if (line != kMetricsSchemaLine) throw fail("expected '" + std::string(kMetricsSchemaLine) + "'");
      schema = true;
      continue;
    }
    if (!header) {
      if (line != metrics_columns()) throw fail("unexpected column header");
      header = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 14) throw fail("expected 14 columns, found " + std::to_string(cells.size()));
    std::vector<double> v(14);
    for (std::size_t i = 0; i < 14; ++i) {
      try {
        std::size_t used = 0;
        v[i] = std::stod(cells[i], &used);
        if (used != cells[i].size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw fail("column " + std::to_string(i + 1) + " is not a number: '" + cells[i] + "'");
      }
    }
    IterationMetrics m;
    m.iter = static_cast<std::size_t>(v[0]);
    m.env_steps = static_cast<std::size_t>(v[1]);
    m.success_rate = v[2];
    m.mean_ep_len = v[3];
    m.mean_r_task = v[4];
    m.mean_r_reg = v[5];
    m.mean_r_safety = v[6];
    m.loss_surrogate = v[7];
    m.loss_v1 = v[8];
    m.loss_v2 = v[9];
    m.loss_v3 = v[10];
    m.approx_kl = v[11];
    m.lr = v[12];
    m.max_joint_acc = v[13];
    rows.push_back(m);
  }
  if (!header) {
    ++lineno;
    throw fail("missing schema or header line");
  }
  return rows;
}

std::vector<IterationMetrics> read_metrics_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path, "cannot open metrics file");
  return read_metrics_csv(in, path);
}

json net_config_to_json(const nn::NetConfig& c) {
  return {{"encoder",
           {{"num_heads", c.encoder.num_heads},
            {"num_layers", c.encoder.num_layers},
            {"d_model", c.encoder.d_model},
            {"feedforward", c.encoder.feedforward},
            {"output", c.encoder.output}}},
          {"mlp", c.mlp},
          {"min_std", c.min_std},
          {"init_log_std", c.init_log_std}};
}

nn::NetConfig net_config_from_json(const json& j) {
  nn::NetConfig c;
  const json& e = detail::require(j, "$.meta.network", "encoder");
  c.encoder.num_heads = e.at("num_heads").get<std::size_t>();
  c.encoder.num_layers = e.at("num_layers").get<std::size_t>();
  c.encoder.d_model = e.at("d_model").get<std::size_t>();
  c.encoder.feedforward = e.at("feedforward").get<std::size_t>();
  c.encoder.output = e.at("output").get<std::size_t>();
  c.mlp = j.at("mlp").get<std::vector<std::size_t>>();
  c.min_std = j.at("min_std").get<double>();
  c.init_log_std = j.at("init_log_std").get<double>();
  return c;
}

// ---- trainer --------------------------------------------------------------

Trainer::Trainer(const RunConfig& cfg, CriticMode mode, std::uint64_t seed)
    : cfg_(cfg), mode_(mode), rng_(stream_seed(seed, kTrainerStream)) {
  cfg_.seed = seed;
  auto chain = std::make_shared<KinematicChain>(load_config_chain(cfg_));
  chain_ = chain;
  const auto motions = load_config_motions(cfg_, *chain);
  venv_ = std::make_unique<VecEnv>(chain_, motions, cfg_.env, cfg_.ppo.num_envs, seed);
  const Env& e0 = venv_->env(0);
  dims_ = {e0.obs_width(), e0.token_width(), e0.num_tokens(), e0.num_joints()};

  std::mt19937_64 init(stream_seed(seed, kInitStream));
  policy_ = nn::PolicyNet(dims_, cfg_.network, init);
  const std::size_t n_critics = mode == CriticMode::Multi ? kRewardGroups : 1;
  for (std::size_t i = 0; i < n_critics; ++i) critics_.emplace_back(dims_, cfg_.network, init);
  ppo_ = std::make_unique<PPO>(policy_, critics_, cfg_.ppo, mode);
  buffer_ = RolloutBuffer(cfg_.ppo.rollout_length, cfg_.ppo.num_envs, dims_, n_critics);
}

namespace {

std::vector<std::size_t> select_rows(const std::vector<std::vector<double>>& t_lefts, std::size_t state_index) {
  std::vector<std::size_t> sel(t_lefts.size());
  for (std::size_t i = 0; i < t_lefts.size(); ++i) sel[i] = nn::select_index(t_lefts[i], state_index);
  return sel;
}

}  // namespace

void Trainer::collect(IterationMetrics& m) {
  const std::size_t T = buffer_.steps();
  const std::size_t N = buffer_.envs();
  const std::size_t nj = dims_.action_dim;
  const std::size_t ow = dims_.obs_width;
  const std::size_t tw = dims_.num_tokens * dims_.token_width;
  const std::size_t state_index = dims_.num_tokens - 1;
  const std::size_t window = cfg_.train.success_window > 0 ? cfg_.train.success_window : N;
  std::normal_distribution<double> n01;

  double sum_task = 0.0, sum_reg = 0.0, sum_safety = 0.0, sum_acc = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> obs = venv_->observations();
    std::vector<double> tokens = venv_->tokens();
    std::vector<std::size_t> select = select_rows(venv_->t_lefts(), state_index);
    const std::size_t row0 = t * N;
    std::copy(obs.begin(), obs.end(), buffer_.obs.begin() + static_cast<std::ptrdiff_t>(row0 * ow));
    std::copy(tokens.begin(), tokens.end(), buffer_.tokens.begin() + static_cast<std::ptrdiff_t>(row0 * tw));
    std::copy(select.begin(), select.end(), buffer_.select.begin() + static_cast<std::ptrdiff_t>(row0));

    const nn::NetInput in = nn::make_input(dims_, N, std::move(obs), std::move(tokens), std::move(select));
    const nn::PolicyOutput out = policy_.forward(in);
    std::vector<double> actions(N * nj);
    const auto mean = out.mean.data();
    const auto sd = out.std.data();
    for (std::size_t i = 0; i < N * nj; ++i) actions[i] = mean[i] + sd[i % nj] * n01(rng_);
    const nn::Tensor logp = nn::gaussian_log_prob(out.mean, out.std, nn::Tensor::from({N, nj}, actions));
    for (std::size_t n = 0; n < N; ++n) {
      buffer_.log_prob[row0 + n] = logp.data()[n];
      for (std::size_t j = 0; j < nj; ++j) {
        buffer_.mean[(row0 + n) * nj + j] = mean[n * nj + j];
        buffer_.std[(row0 + n) * nj + j] = sd[j];
      }
    }
    std::copy(actions.begin(), actions.end(), buffer_.actions.begin() + static_cast<std::ptrdiff_t>(row0 * nj));
    for (std::size_t s = 0; s < critics_.size(); ++s) {
      const nn::Tensor v = critics_[s].forward(in);
      std::copy(v.data().begin(), v.data().end(), buffer_.values[s].begin() + static_cast<std::ptrdiff_t>(row0));
    }

    const VecStepResult res = venv_->step(actions);
    for (std::size_t n = 0; n < N; ++n) {
      const StepResult& r = res.results[n];
      const std::size_t i = row0 + n;
      if (mode_ == CriticMode::Multi) {
        buffer_.rewards[0][i] = r.r_task;
        buffer_.rewards[1][i] = r.r_reg;
        buffer_.rewards[2][i] = r.r_safety;
      } else {
        const double r1[] = {r.r_task}, r2[] = {r.r_reg}, r3[] = {r.r_safety};
        buffer_.rewards[0][i] = single_critic_reward(r1, r2, r3, cfg_.ppo.weights)[0];
      }
      buffer_.terminated[i] = r.terminated;
      buffer_.truncated[i] = r.truncated && !r.terminated;
      for (std::size_t s = 0; s < critics_.size(); ++s) buffer_.bootstrap[s][i] = 0.0;
      sum_task += r.r_task;
      sum_reg += r.r_reg;
      sum_safety += r.r_safety;
      sum_acc += r.info.max_joint_acc;
    }

    // Truncated episodes bootstrap from the value of their final state.
    std::vector<std::size_t> trunc;
    for (std::size_t k = 0; k < res.terminal.size(); ++k) {
      if (buffer_.truncated[row0 + res.terminal[k].env]) trunc.push_back(k);
    }
    if (!trunc.empty()) {
      std::vector<double> tobs, ttok;
      std::vector<std::vector<double>> tl;
      for (std::size_t k : trunc) {
        const TerminalView& v = res.terminal[k];
        tobs.insert(tobs.end(), v.obs.begin(), v.obs.end());
        ttok.insert(ttok.end(), v.tokens.begin(), v.tokens.end());
        tl.push_back(v.t_lefts);
      }
      const nn::NetInput tin =
          nn::make_input(dims_, trunc.size(), std::move(tobs), std::move(ttok), select_rows(tl, state_index));
      for (std::size_t s = 0; s < critics_.size(); ++s) {
        const nn::Tensor v = critics_[s].forward(tin);
        for (std::size_t k = 0; k < trunc.size(); ++k) {
          buffer_.bootstrap[s][row0 + res.terminal[trunc[k]].env] = v.data()[k];
        }
      }
    }

    for (const EpisodeStats& ep : res.finished) {
      recent_.push_back(ep);
      while (recent_.size() > window) recent_.pop_front();
    }
  }

  {
    const nn::NetInput in = nn::make_input(dims_, N, venv_->observations(), venv_->tokens(),
                                           select_rows(venv_->t_lefts(), state_index));
    for (std::size_t s = 0; s < critics_.size(); ++s) {
      const nn::Tensor v = critics_[s].forward(in);
      std::copy(v.data().begin(), v.data().end(), buffer_.last_values[s].begin());
    }
  }

  const double steps = static_cast<double>(T * N);
  m.mean_r_task = sum_task / steps;
  m.mean_r_reg = sum_reg / steps;
  m.mean_r_safety = sum_safety / steps;
  m.max_joint_acc = sum_acc / steps;
  if (!recent_.empty()) {
    double ok = 0.0, len = 0.0;
    for (const auto& ep : recent_) {
      ok += ep.success ? 1.0 : 0.0;
      len += ep.length;
    }
    m.success_rate = ok / static_cast<double>(recent_.size());
    m.mean_ep_len = len / static_cast<double>(recent_.size());
  }
}

IterationMetrics Trainer::iterate() {
  IterationMetrics m;
  collect(m);
  const PPOStats st = ppo_->update(buffer_, rng_);
  ++iter_;
  env_steps_ += buffer_.size();
  m.iter = iter_;
  m.env_steps = env_steps_;
  m.loss_surrogate = st.surrogate;
  m.loss_v1 = st.value_loss[0];
  m.loss_v2 = st.value_loss[1];
  m.loss_v3 = st.value_loss[2];
  m.approx_kl = st.approx_kl;
  m.lr = st.lr;
  return m;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ck;
  export_params(policy_.parameters(), "policy.", ck.tensors);
  for (std::size_t s = 0; s < critics_.size(); ++s) {
    export_params(critics_[s].parameters(), "critic" + std::to_string(s) + ".", ck.tensors);
  }
  ck.config = run_config_to_json(cfg_);
  ck.meta = {{"mode", critic_mode_name(mode_)},
             {"dims",
              {{"obs_width", dims_.obs_width},
               {"token_width", dims_.token_width},
               {"num_tokens", dims_.num_tokens},
               {"action_dim", dims_.action_dim}}},
             {"network", net_config_to_json(cfg_.network)},
             {"chain", json::parse(save_chain(*chain_))},
             {"lr", ppo_->lr()},
             {"env_steps", env_steps_}};
  std::ostringstream rs;
  rs << rng_;
  ck.rng_state = rs.str();
  ck.iteration = static_cast<std::int64_t>(iter_);
  return ck;
}

TrainOutputs run_training(const RunConfig& cfg, CriticMode mode, std::uint64_t seed, const std::string& out_dir,
                          const std::function<void(const IterationMetrics&)>& progress) {
  fs::create_directories(out_dir);
  Trainer trainer(cfg, mode, seed);
  TrainOutputs out;
  out.metrics_path = (fs::path(out_dir) / "metrics.csv").string();
  {
    std::ofstream c(fs::path(out_dir) / "config.json");
    c << run_config_to_json(trainer.config()).dump(2) << "\n";
  }
  std::ofstream csv(out.metrics_path, std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write " + out.metrics_path);
  csv << metrics_header();
  for (std::size_t i = 0; i < cfg.train.iterations; ++i) {
    const IterationMetrics m = trainer.iterate();
    csv << format_metrics_row(m);
    csv.flush();
    out.rows.push_back(m);
    if (progress) progress(m);
    if (cfg.train.checkpoint_every > 0 && m.iter % cfg.train.checkpoint_every == 0 && m.iter < cfg.train.iterations) {
      char name[32];
      std::snprintf(name, sizeof(name), "iter_%06zu", m.iter);
      save_checkpoint(trainer.checkpoint(), (fs::path(out_dir) / "checkpoints" / name).string());
    }
  }
  out.final_checkpoint = (fs::path(out_dir) / "checkpoint").string();
  save_checkpoint(trainer.checkpoint(), out.final_checkpoint);
  return out;
}

// ---- evaluation -----------------------------------------------------------

LoadedPolicy load_policy(const Checkpoint& ckpt) {
  LoadedPolicy lp;
  try {
    const json& meta = ckpt.meta;
    const json& d = detail::require(meta, "$.meta", "dims");
    lp.dims = {d.at("obs_width").get<std::size_t>(), d.at("token_width").get<std::size_t>(),
               d.at("num_tokens").get<std::size_t>(), d.at("action_dim").get<std::size_t>()};
    lp.mode = parse_critic_mode(detail::as_string(detail::require(meta, "$.meta", "mode"), "$.meta.mode"));
    lp.chain = std::make_shared<KinematicChain>(load_chain(detail::require(meta, "$.meta", "chain").dump()));
    const nn::NetConfig net = net_config_from_json(detail::require(meta, "$.meta", "network"));
    lp.env = parse_run_config(ckpt.config, "", false).env;
    std::mt19937_64 rng(0);
    lp.policy = nn::PolicyNet(lp.dims, net, rng);
  } catch (const json::exception& e) {
    throw SchemaError("$.meta", e.what());
  }
  nn::ParamList params = lp.policy.parameters();
  import_params(ckpt, "policy.", params);
  return lp;
}

namespace {

struct EpisodeRunner {
  std::unique_ptr<Env> env;
  EvalEpisode record;
  std::vector<TraceRow> trace;
  bool done = false;
};

std::vector<double> mean_actions(const nn::PolicyNet& policy, const std::vector<Env*>& envs) {
  const nn::NetDims& d = policy.dims();
  std::vector<double> obs, tokens;
  std::vector<std::size_t> select;
  for (Env* e : envs) {
    if (e->obs_width() != d.obs_width || e->token_width() != d.token_width || e->num_tokens() != d.num_tokens ||
        e->num_joints() != d.action_dim) {
      throw DimensionError("policy expects obs " + std::to_string(d.obs_width) + ", tokens " +
                           std::to_string(d.num_tokens) + "x" + std::to_string(d.token_width) + ", " +
                           std::to_string(d.action_dim) + " joints; environment has obs " +
                           std::to_string(e->obs_width()) + ", tokens " + std::to_string(e->num_tokens()) + "x" +
                           std::to_string(e->token_width()) + ", " + std::to_string(e->num_joints()) + " joints");
    }
    const auto o = e->observe();
    const auto t = e->command_tokens();
    obs.insert(obs.end(), o.begin(), o.end());
    tokens.insert(tokens.end(), t.begin(), t.end());
    select.push_back(nn::select_index(e->sequence().t_lefts(), e->num_tokens() - 1));
  }
  const auto in = nn::make_input(d, envs.size(), std::move(obs), std::move(tokens), std::move(select));
  const auto out = policy.forward(in);
  return {out.mean.data().begin(), out.mean.data().end()};
}

std::size_t step_cap(const MotionTrajectory& m, const EnvConfig& env) {
  return static_cast<std::size_t>(std::ceil(m.duration() / env.dt_policy)) + 1000;
}

}  // namespace

EvalReport evaluate(const nn::PolicyNet& policy, std::shared_ptr<const KinematicChain> chain,
                    std::shared_ptr<const MotionTrajectory> motion, const EnvConfig& env, std::size_t episodes,
                    std::uint64_t seed, std::size_t batch) {
  if (episodes == 0) throw std::invalid_argument("evaluate: episode count must be positive");
  if (batch == 0) batch = 1;
  EvalReport rep;
  const std::size_t nj = policy.dims().action_dim;
  const std::size_t cap = step_cap(*motion, env);
  const int threads = threads_from_env();
  for (std::size_t e0 = 0; e0 < episodes; e0 += batch) {
    const std::size_t e1 = std::min(episodes, e0 + batch);
    std::vector<EpisodeRunner> run(e1 - e0);
    for (std::size_t k = 0; k < run.size(); ++k) {
      run[k].env = std::make_unique<Env>(chain, motion, env, stream_seed(seed, e0 + k));
      run[k].record.index = e0 + k;
    }
    for (std::size_t step = 0; step < cap; ++step) {
      std::vector<Env*> live;
      std::vector<std::size_t> idx;
      for (std::size_t k = 0; k < run.size(); ++k) {
        if (!run[k].done) {
          live.push_back(run[k].env.get());
          idx.push_back(k);
        }
      }
      if (live.empty()) break;
      const std::vector<double> act = mean_actions(policy, live);
#pragma omp parallel for schedule(static) num_threads(threads > 0 ? threads : omp_get_max_threads())
      for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(live.size()); ++q) {
        EpisodeRunner& r = run[idx[q]];
        const StepResult s = r.env->step(std::span<const double>(act).subspan(q * nj, nj));
        EvalEpisode& ep = r.record;
        ep.length += 1;
        ep.return_task += s.r_task;
        ep.return_reg += s.r_reg;
        ep.return_safety += s.r_safety;
        r.trace.push_back({ep.index, ep.length, r.env->state().time, s.info.max_joint_acc, s.info.consumed_keyframe});
        if (s.info.consumed_keyframe >= 0) ep.keyframe_steps.push_back(ep.length);
        if (s.terminated || s.truncated) {
          ep.success = s.truncated && !s.terminated;
          ep.cause = s.diverged ? "diverged" : std::string(termination_cause_name(s.info.cause));
          r.done = true;
        }
      }
    }
    for (auto& r : run) {
      if (!r.done) r.record.cause = "step_cap";
      rep.episodes.push_back(std::move(r.record));
      rep.trace.insert(rep.trace.end(), r.trace.begin(), r.trace.end());
    }
  }
  double ok = 0.0, len = 0.0;
  for (const auto& ep : rep.episodes) {
    ok += ep.success ? 1.0 : 0.0;
    len += ep.length;
  }
  rep.success_rate = ok / static_cast<double>(episodes);
  rep.mean_ep_len = len / static_cast<double>(episodes);
  return rep;
}

json eval_report_to_json(const EvalReport& r) {
  json eps = json::array();
  for (const auto& e : r.episodes) {
    eps.push_back({{"index", e.index},
                   {"success", e.success},
                   {"length", e.length},
                   {"return_task", e.return_task},
                   {"return_reg", e.return_reg},
                   {"return_safety", e.return_safety},
                   {"cause", e.cause},
                   {"keyframe_steps", e.keyframe_steps}});
  }
  return {{"success_rate", r.success_rate},
          {"mean_ep_len", r.mean_ep_len},
          {"episodes", eps},
          {"keyframe_window_ratio", keyframe_window_ratio(r)}};
}

std::string eval_trace_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "episode,step,time,max_joint_acc,keyframe\n";
  for (const auto& t : r.trace) {
    os << t.episode << ',' << t.step << ',' << fmt(t.time) << ',' << fmt(t.max_joint_acc) << ',' << t.keyframe
       << '\n';
  }
  return os.str();
}

double keyframe_window_ratio(const EvalReport& r, int window) {
  double in_sum = 0.0, out_sum = 0.0;
  std::size_t in_n = 0, out_n = 0;
  std::size_t row = 0;
  for (const auto& ep : r.episodes) {
    for (int s = 1; s <= ep.length; ++s, ++row) {
      bool near = false;
      for (int k : ep.keyframe_steps) near = near || std::abs(s - k) <= window;
      const double a = r.trace.at(row).max_joint_acc;
      if (near) {
        in_sum += a;
        ++in_n;
      } else {
        out_sum += a;
        ++out_n;
      }
    }
  }
  if (in_n == 0 || out_n == 0 || out_sum == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (in_sum / static_cast<double>(in_n)) / (out_sum / static_cast<double>(out_n));
}

std::vector<json> replay(const nn::PolicyNet& policy, std::shared_ptr<const KinematicChain> chain,
                         std::shared_ptr<const MotionTrajectory> motion, const EnvConfig& env, std::uint64_t seed) {
  Env e(chain, motion, env, stream_seed(seed, 0));
  std::vector<json> lines;
  const std::size_t cap = step_cap(*motion, env);
  for (std::size_t step = 0; step < cap; ++step) {
    const std::vector<double> act = mean_actions(policy, {&e});
    const StepResult s = e.step(act);
    const SimState& st = e.state();
    const CommandSequence& seq = e.sequence();
    lines.push_back({{"step", st.steps},
                     {"time", st.time},
                     {"state",
                      {{"x", st.x},
                       {"z", st.z},
                       {"pitch", st.pitch},
                       {"vx", st.vx},
                       {"vz", st.vz},
                       {"pitch_rate", st.pitch_rate},
                       {"theta", st.theta},
                       {"theta_dot", st.theta_dot},
                       {"prev_action", st.prev_action},
                       {"consumed", st.consumed}}},
                     {"sequence",
                      {{"reach_times", seq.reach_times},
                       {"active", seq.active},
                       {"t_refresh", seq.t_refresh},
                       {"t_lefts", seq.t_lefts()}}},
                     {"action", act},
                     {"r_task", s.r_task},
                     {"r_reg", s.r_reg},
                     {"r_safety", s.r_safety},
                     {"max_joint_acc", s.info.max_joint_acc},
                     {"keyframe", s.info.consumed_keyframe},
                     {"terminated", s.terminated},
                     {"truncated", s.truncated},
                     {"cause", s.diverged ? "diverged" : std::string(termination_cause_name(s.info.cause))}});
    if (s.terminated || s.truncated) break;
  }
  return lines;
}

}  // namespace shadow
