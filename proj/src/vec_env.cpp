#include <cstdlib>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "shadow/error.hpp"
#include "shadow/sim2d.hpp"

namespace shadow {

int threads_from_env() {
  if (const char* v = std::getenv("SHADOW_THREADS")) {
    const int n = std::atoi(v);
    if (n > 0) return n;
  }
  return 0;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x5eedu};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

VecEnv::VecEnv(std::shared_ptr<const KinematicChain> chain, std::vector<std::shared_ptr<const MotionTrajectory>> motions,
               EnvConfig cfg, std::size_t count, std::uint64_t seed) {
  if (motions.empty()) throw std::invalid_argument("VecEnv: at least one motion is required");
  if (count == 0) throw std::invalid_argument("VecEnv: at least one environment is required");
  envs_.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    envs_.emplace_back(chain, motions[i % motions.size()], cfg, stream_seed(seed, i));
  }
  running_.resize(count);
  for (std::size_t i = 0; i < count; ++i) running_[i].env = i;
}

void VecEnv::reset_all() {
  for (std::size_t i = 0; i < envs_.size(); ++i) {
    envs_[i].reset();
    running_[i] = EpisodeStats{.env = i};
  }
}

VecStepResult VecEnv::step(std::span<const double> actions) {
  const std::size_t n = envs_.size();
  const std::size_t nj = envs_.front().num_joints();
  if (actions.size() != n * nj) {
    throw DimensionError("VecEnv::step: expected " + std::to_string(n * nj) + " action values, got " +
                         std::to_string(actions.size()));
  }
  VecStepResult out;
  out.results.resize(n);
  std::vector<char> done(n, 0);
  std::vector<TerminalView> views(n);
  const int threads = threads_ > 0 ? threads_ : threads_from_env();

  // Each environment owns its RNG, so the schedule cannot change results.
#pragma omp parallel for schedule(static) num_threads(threads > 0 ? threads : omp_get_max_threads())
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    StepResult r = envs_[i].step(actions.subspan(static_cast<std::size_t>(i) * nj, nj));
    EpisodeStats& ep = running_[i];
    ep.length += 1;
    ep.return_task += r.r_task;
    ep.return_reg += r.r_reg;
    ep.return_safety += r.r_safety;
    if (r.terminated || r.truncated) {
      ep.success = r.truncated && !r.terminated;
      done[i] = 1;
      views[i] = {static_cast<std::size_t>(i), envs_[i].observe(), envs_[i].command_tokens(),
                  envs_[i].sequence().t_lefts()};
      envs_[i].reset();
    }
    out.results[i] = std::move(r);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!done[i]) continue;
    out.finished.push_back(running_[i]);
    out.terminal.push_back(std::move(views[i]));
    running_[i] = EpisodeStats{.env = i};
  }
  return out;
}

std::vector<double> VecEnv::observations() const {
  std::vector<double> out;
  out.reserve(envs_.size() * envs_.front().obs_width());
  for (const Env& e : envs_) {
    const auto o = e.observe();
    out.insert(out.end(), o.begin(), o.end());
  }
  return out;
}

std::vector<double> VecEnv::tokens() const {
  std::vector<double> out;
  for (const Env& e : envs_) {
    const auto t = e.command_tokens();
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

std::vector<std::vector<double>> VecEnv::t_lefts() const {
  std::vector<std::vector<double>> out;
  out.reserve(envs_.size());
  for (const Env& e : envs_) out.push_back(e.sequence().t_lefts());
  return out;
}

}  // namespace shadow
