#include "shadow/config.hpp"

#include <exception>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json_util.hpp"

namespace shadow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// A visitor walks every config field once; Reader fills the struct from JSON
// and Writer emits it, so both directions share one field list.

class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw SchemaError(path_, "expected an object");
  }

  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw SchemaError(path_ + "." + it.key(), "unknown field");
    }
  }

  template <class T>
  void field(const char* key, T& v) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    read(*it, path_ + "." + key, v);
  }

  /// Marks a key as handled elsewhere.
  void claim(const char* key) { seen_.insert(key); }

  template <class F>
  void section(const char* key, F&& fn) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    Reader sub(*it, path_ + "." + key);
    fn(sub);
  }

 private:
  static void read(const json& v, const std::string& p, double& out) { out = detail::as_number(v, p); }
  static void read(const json& v, const std::string& p, bool& out) {
    if (!v.is_boolean()) throw SchemaError(p, "expected true or false");
    out = v.get<bool>();
  }
  static void read(const json& v, const std::string& p, int& out) {
    if (!v.is_number_integer()) throw SchemaError(p, "expected an integer");
    out = v.get<int>();
  }
  static void read(const json& v, const std::string& p, std::size_t& out) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw SchemaError(p, "expected a non-negative integer");
    out = v.get<std::size_t>();
  }
  static void read(const json& v, const std::string& p, std::string& out) { out = detail::as_string(v, p); }
  static void read(const json& v, const std::string& p, std::vector<double>& out) { out = detail::as_numbers(v, p); }
  static void read(const json& v, const std::string& p, std::vector<std::size_t>& out) {
    if (!v.is_array()) throw SchemaError(p, "expected an array of integers");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::size_t x = 0;
      read(v[i], p + "[" + std::to_string(i) + "]", x);
      out.push_back(x);
    }
  }
  static void read(const json& v, const std::string& p, Interval& out) {
    const auto a = detail::as_numbers(v, p, 2);
    if (a[1] < a[0]) throw SchemaError(p, "interval upper bound below lower bound");
    out = {a[0], a[1]};
  }
  static void read(const json& v, const std::string& p, std::array<double, kRewardGroups>& out) {
    const auto a = detail::as_numbers(v, p, kRewardGroups);
    std::copy(a.begin(), a.end(), out.begin());
  }
  static void read(const json& v, const std::string& p, QuatTerminationMode& out) {
    const auto s = detail::as_string(v, p);
    if (s == "angle") {
      out = QuatTerminationMode::Angle;
    } else if (s == "im_norm") {
      out = QuatTerminationMode::ImNorm;
    } else {
      throw SchemaError(p, "expected \"angle\" or \"im_norm\"");
    }
  }
  static void read(const json& v, const std::string& p, JointTerminationMode& out) {
    const auto s = detail::as_string(v, p);
    if (s == "any") {
      out = JointTerminationMode::Any;
    } else if (s == "all") {
      out = JointTerminationMode::All;
    } else {
      throw SchemaError(p, "expected \"any\" or \"all\"");
    }
  }
  static void read(const json& v, const std::string& p, ValueTargetMode& out) {
    try {
      out = parse_value_target_mode(detail::as_string(v, p));
    } catch (const SchemaError& e) {
      throw SchemaError(p, e.what());
    }
  }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

class Writer {
 public:
  explicit Writer(json& out) : out_(out) { out_ = json::object(); }

  template <class T>
  void field(const char* key, T& v) {
    out_[key] = write(v);
  }

  template <class F>
  void section(const char* key, F&& fn) {
    json sub;
    Writer w(sub);
    fn(w);
    out_[key] = std::move(sub);
  }

 private:
  template <class T>
  static json write(const T& v) {
    return json(v);
  }
  static json write(const Interval& v) { return json::array({v.lo, v.hi}); }
  static json write(const QuatTerminationMode& m) { return m == QuatTerminationMode::Angle ? "angle" : "im_norm"; }
  static json write(const JointTerminationMode& m) { return m == JointTerminationMode::Any ? "any" : "all"; }
  static json write(const ValueTargetMode& m) { return value_target_mode_name(m); }

  json& out_;
};

template <class V>
void visit_env(V& v, EnvConfig& c) {
  v.field("dt_policy", c.dt_policy);
  v.field("substeps", c.substeps);
  v.field("gravity", c.gravity);
  v.field("kp", c.kp);
  v.field("kd", c.kd);
  v.field("gain_scale", c.gain_scale);
  v.section("contact", [&](auto& s) {
    s.field("k_n", c.contact.k_n);
    s.field("c_n", c.contact.c_n);
    s.field("k_t", c.contact.k_t);
    s.field("mu", c.contact.mu);
  });
  v.field("base_inertia", c.base_inertia);
  v.field("spawn_height", c.spawn_height);
  v.field("init_ratio", c.init_ratio);
  v.field("t_int", c.t_int);
  v.field("keyframes", c.keyframes);
  v.field("history", c.history);
  v.field("action_scale", c.action_scale);
  v.field("randomize", c.randomize);
  v.field("divergence_limit", c.divergence_limit);
  v.section("domain_rand", [&](auto& s) {
    s.field("mass_scale", c.rand.mass_scale);
    s.field("com_offset", c.rand.com_offset);
    s.field("kp_scale", c.rand.kp_scale);
    s.field("kd_scale", c.rand.kd_scale);
    s.field("motor_delay", c.rand.motor_delay);
  });
}

template <class V>
void visit_reward(V& v, RewardConfig& c) {
  v.field("base_pos", c.base_pos);
  v.field("base_orient", c.base_orient);
  v.field("joint", c.joint);
  v.field("action_rate", c.action_rate);
  v.field("joint_acc", c.joint_acc);
  v.field("joint_vel", c.joint_vel);
  v.field("pos_limit", c.pos_limit);
  v.field("torque_limit", c.torque_limit);
  v.field("torque_margin", c.torque_margin);
}

template <class V>
void visit_termination(V& v, TerminationConfig& c) {
  v.field("pos_threshold", c.pos_threshold);
  v.field("orient_threshold", c.orient_threshold);
  v.field("joint_threshold", c.joint_threshold);
  v.field("quat_mode", c.quat_mode);
  v.field("joint_mode", c.joint_mode);
}

template <class V>
void visit_network(V& v, nn::NetConfig& c) {
  v.section("encoder", [&](auto& s) {
    s.field("num_heads", c.encoder.num_heads);
    s.field("num_layers", c.encoder.num_layers);
    s.field("d_model", c.encoder.d_model);
    s.field("feedforward", c.encoder.feedforward);
    s.field("output", c.encoder.output);
  });
  v.field("mlp", c.mlp);
  v.field("min_std", c.min_std);
  v.field("init_log_std", c.init_log_std);
}

template <class V>
void visit_ppo(V& v, PPOConfig& c) {
  v.field("lr", c.lr);
  v.field("clip", c.clip);
  v.field("entropy_coef", c.entropy_coef);
  v.field("desired_kl", c.desired_kl);
  v.field("max_grad_norm", c.max_grad_norm);
  v.field("num_minibatches", c.num_minibatches);
  v.field("gamma", c.gamma);
  v.field("lambda", c.lambda);
  v.field("weights", c.weights);
  v.field("epochs", c.epochs);
  v.field("rollout_length", c.rollout_length);
  v.field("num_envs", c.num_envs);
  v.field("norm_eps", c.norm_eps);
  v.field("value_target", c.value_target);
  v.field("weight_decay", c.weight_decay);
  v.field("lr_min", c.lr_min);
  v.field("lr_max", c.lr_max);
}

template <class V>
void visit_run(V& v, RunConfig& c) {
  v.field("chain", c.chain);
  v.section("env", [&](auto& s) { visit_env(s, c.env); });
  v.section("reward", [&](auto& s) { visit_reward(s, c.env.reward); });
  v.section("termination", [&](auto& s) { visit_termination(s, c.env.termination); });
  v.section("network", [&](auto& s) { visit_network(s, c.network); });
  v.section("ppo", [&](auto& s) { visit_ppo(s, c.ppo); });
  v.section("train", [&](auto& s) {
    s.field("iterations", c.train.iterations);
    s.field("checkpoint_every", c.train.checkpoint_every);
    s.field("success_window", c.train.success_window);
  });
  v.field("seed", c.seed);
  v.field("output_dir", c.output_dir);
}

std::string resolve(const std::string& p, const std::string& base_dir) {
  if (p.empty()) return p;
  const fs::path path(p);
  if (path.is_absolute() || base_dir.empty()) return path.lexically_normal().string();
  return (fs::path(base_dir) / path).lexically_normal().string();
}

MotionSource parse_motion_source(const json& v, const std::string& p, const std::string& base_dir) {
  if (!v.is_object()) throw SchemaError(p, "expected an object with \"path\" or \"generate\"");
  MotionSource m;
  std::string kind;
  {
    Reader r(v, p);
    r.field("path", m.path);
    r.field("generate", kind);
    r.field("duration", m.params.duration);
    r.field("fps", m.params.fps);
  }
  if (m.path.empty() == kind.empty()) throw SchemaError(p, "exactly one of \"path\" and \"generate\" is required");
  if (!kind.empty()) {
    try {
      m.generate = parse_motion_kind(kind);
    } catch (const std::exception& e) {
      throw SchemaError(p + ".generate", e.what());
    }
  }
  m.path = resolve(m.path, base_dir);
  return m;
}

}  // namespace

void RunConfig::validate(bool check_files) const {
  auto wrap = [](const char* path, auto&& fn) {
    try {
      fn();
    } catch (const SchemaError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw SchemaError(path, e.what());
    }
  };
  if (chain.empty()) throw SchemaError("$.chain", "missing required field");
  if (check_files && !fs::exists(chain)) throw SchemaError("$.chain", "file not found: " + chain);
  if (motions.empty()) throw SchemaError("$.motions", "at least one motion is required");
  for (std::size_t i = 0; i < motions.size(); ++i) {
    const auto& m = motions[i];
    const std::string p = "$.motions[" + std::to_string(i) + "]";
    if (check_files && !m.generate && !fs::exists(m.path)) throw SchemaError(p + ".path", "file not found: " + m.path);
    if (!(m.params.duration > 0.0) || !(m.params.fps > 0.0)) throw SchemaError(p, "duration and fps must be positive");
  }
  wrap("$.env", [&] { env.validate(); });
  wrap("$.reward", [&] { env.reward.validate(); });
  wrap("$.termination", [&] { env.termination.validate(); });
  wrap("$.network", [&] { network.validate(); });
  wrap("$.ppo", [&] { ppo.validate(); });
  if (train.iterations == 0) throw SchemaError("$.train.iterations", "must be positive");
}

RunConfig parse_run_config(const json& doc, const std::string& base_dir, bool check_files) {
  RunConfig cfg;
  {
    Reader r(doc, "$");
    visit_run(r, cfg);
    auto it = doc.find("motions");
    r.claim("motions");
    if (it != doc.end()) {
      if (!it->is_array()) throw SchemaError("$.motions", "expected an array");
      for (std::size_t i = 0; i < it->size(); ++i) {
        cfg.motions.push_back(parse_motion_source((*it)[i], "$.motions[" + std::to_string(i) + "]", base_dir));
      }
    }
  }
  cfg.chain = resolve(cfg.chain, base_dir);
  cfg.validate(check_files);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("$", "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const json doc = detail::parse_document(ss.str(), "config");
  return parse_run_config(doc, fs::path(path).parent_path().string());
}

json run_config_to_json(const RunConfig& cfg) {
  json out;
  RunConfig copy = cfg;
  Writer w(out);
  visit_run(w, copy);
  json motions = json::array();
  for (const auto& m : cfg.motions) {
    json j;
    if (m.generate) {
      j["generate"] = std::string(motion_kind_name(*m.generate));
      j["duration"] = m.params.duration;
      j["fps"] = m.params.fps;
    } else {
      j["path"] = m.path;
    }
    motions.push_back(std::move(j));
  }
  out["motions"] = std::move(motions);
  return out;
}

KinematicChain load_config_chain(const RunConfig& cfg) { return load_chain_file(cfg.chain); }

std::vector<std::shared_ptr<const MotionTrajectory>> load_config_motions(const RunConfig& cfg,
                                                                        const KinematicChain& chain) {
  std::vector<std::shared_ptr<const MotionTrajectory>> out;
  for (const auto& m : cfg.motions) {
    if (m.generate) {
      out.push_back(std::make_shared<MotionTrajectory>(gen_motion(*m.generate, chain, m.params)));
    } else {
      out.push_back(std::make_shared<MotionTrajectory>(load_motion_file(m.path)));
    }
  }
  return out;
}

}  // namespace shadow
