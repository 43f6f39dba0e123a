#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>

#include "s4rl/run.hpp"

namespace s4rl {

// One grid entry: task x agent x (kind or fraction) x seed -> final score.
struct SweepCell {
  std::string task;         // "env:split"
  std::string agent_label;  // "cql" or "s4rl(<kind>)"
  std::string param;        // augmentation spec or fraction text
  double fraction = 1.0;
  std::uint64_t seed = 0;
  double score = 0.0;
  bool ok = false;
  std::string error;
};

struct SweepReport {
  std::string axis;  // "augmentation" or "fraction"
  std::vector<SweepCell> cells;
};

inline std::size_t sweep_worker_count() {
  if (const char* env = std::getenv("S4RL_WORKERS")) {
    const long n = std::atol(env);
    if (n >= 1) return static_cast<std::size_t>(n);
  }
  return 1;
}

// Cells are independent jobs over disjoint output directories.
inline void run_parallel(std::vector<std::function<void()>> jobs,
                         std::size_t workers) {
  if (workers <= 1) {
    for (auto& j : jobs) j();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, jobs.size()); ++w)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        jobs[i]();
      }
    });
  for (auto& t : pool) t.join();
}

namespace detail {

inline std::string sanitize_path_segment(std::string s) {
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-')
      c = '-';
  return s;
}

inline std::pair<std::string, SplitKind> parse_task(const std::string& task) {
  const auto colon = task.find(':');
  require(colon != std::string::npos,
          "sweep task '" + task + "' must look like 'env:split'");
  return {task.substr(0, colon), split_from_name(task.substr(colon + 1))};
}

inline std::vector<std::string> sweep_task_list(const ExperimentConfig& base) {
  if (!base.sweep_tasks.empty()) return base.sweep_tasks;
  return {base.env + ":" + split_name(base.split)};
}

// Config for one cell: same recipe, repointed env/split/agent/output.
inline ExperimentConfig cell_config(const ExperimentConfig& base,
                                    const std::string& task,
                                    const std::string& agent_label,
                                    const std::string& kind_spec,
                                    double fraction,
                                    const std::string& param_tag) {
  ExperimentConfig cfg = base;
  auto [env_name, split] = parse_task(task);
  cfg.env = env_name;
  cfg.split = split;
  cfg.fraction = fraction;
  if (agent_label == "cql") {
    cfg.agent = "cql-baseline";
  } else {
    cfg.agent = "s4rl";
    cfg.agent_cfg.s4rl.kind = parse_kind(kind_spec, env_name);
  }
  cfg.out = (std::filesystem::path(base.out) / "cells" /
             sanitize_path_segment(task) / sanitize_path_segment(agent_label) /
             sanitize_path_segment(param_tag))
                .string();
  return cfg;
}

// All cells share the sweep-level dataset cache so each dataset is built
// once, up front, not concurrently.
inline void prebuild_datasets(const ExperimentConfig& base,
                              const std::vector<std::string>& tasks,
                              const std::vector<double>& fractions) {
  for (const auto& task : tasks) {
    for (double f : fractions) {
      ExperimentConfig cfg = base;
      auto [env_name, split] = parse_task(task);
      cfg.env = env_name;
      cfg.split = split;
      cfg.fraction = f;
      (void)build_dataset(cfg, std::filesystem::path(base.out) / "datasets");
    }
  }
}

struct CellJob {
  ExperimentConfig cfg;
  SweepCell cell;
};

inline void execute_cells(const ExperimentConfig& base,
                          std::vector<CellJob>& jobs, SweepReport& report) {
  std::vector<SweepCell> results(jobs.size());
  std::vector<std::function<void()>> fns;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    fns.push_back([&, i] {
      SweepCell cell = jobs[i].cell;
      try {
        ExperimentConfig cfg = jobs[i].cfg;
        cfg.seeds = {cell.seed};
        auto env = make_env(cfg.env);
        const OfflineDataset ds = build_dataset(
            cfg, std::filesystem::path(base.out) / "datasets");
        const ReferenceScores refs = reference_scores(*env);
        RunMetrics m = run_seed(cfg, *env, ds, refs, cell.seed);
        cell.score = m.final_score();
        cell.ok = true;
        // Per-cell record; reports are merged from these.
        json j;
        j["task"] = cell.task;
        j["agent"] = cell.agent_label;
        j["param"] = cell.param;
        j["fraction"] = cell.fraction;
        j["seed"] = cell.seed;
        j["score"] = cell.score;
        const RunPaths paths = run_paths(cfg, cell.seed);
        std::ofstream out(paths.dir / "cell.json", std::ios::trunc);
        out << j.dump(2) << "\n";
      } catch (const std::exception& e) {
        cell.ok = false;
        cell.error = e.what();
      }
      results[i] = std::move(cell);
    });
  }
  run_parallel(std::move(fns), sweep_worker_count());
  for (auto& c : results) report.cells.push_back(std::move(c));
}

}  // namespace detail

// Grid over augmentation kinds (plus the separately-coded baseline when
// include_baseline is set), every task and seed of the base config.
inline SweepReport sweep_augmentations(const ExperimentConfig& base,
                                       std::vector<std::string> kinds) {
  require(!kinds.empty(), "sweep needs at least one augmentation kind");
  SweepReport report;
  report.axis = "augmentation";
  const auto tasks = detail::sweep_task_list(base);
  detail::prebuild_datasets(base, tasks, {base.fraction});

  std::vector<detail::CellJob> jobs;
  auto add_jobs = [&](const std::string& agent_label, const std::string& kind) {
    for (const auto& task : tasks) {
      for (std::uint64_t seed : base.seeds) {
        detail::CellJob job;
        job.cfg = detail::cell_config(base, task, agent_label, kind,
                                      base.fraction, agent_label);
        job.cell.task = task;
        job.cell.agent_label = agent_label;
        job.cell.param = agent_label == "cql" ? "baseline" : kind;
        job.cell.fraction = base.fraction;
        job.cell.seed = seed;
        jobs.push_back(std::move(job));
      }
    }
  };
  if (base.sweep_include_baseline) add_jobs("cql", "identity");
  for (const auto& kind : kinds) add_jobs("s4rl(" + kind + ")", kind);
  detail::execute_cells(base, jobs, report);
  return report;
}

// Grid over dataset fractions for the configured augmentation agent and the
// baseline: the limited-data protocol.
inline SweepReport sweep_limited_data(const ExperimentConfig& base,
                                      std::vector<double> fractions) {
  require(!fractions.empty(), "sweep needs at least one fraction");
  for (double f : fractions)
    require(f > 0.0 && f <= 1.0, "sweep fractions must lie in (0,1]");
  SweepReport report;
  report.axis = "fraction";
  const auto tasks = detail::sweep_task_list(base);
  detail::prebuild_datasets(base, tasks, fractions);

  const std::string kind_spec = kind_to_string(base.agent_cfg.s4rl.kind);
  std::vector<detail::CellJob> jobs;
  auto add_jobs = [&](const std::string& agent_label) {
    for (const auto& task : tasks) {
      for (double f : fractions) {
        for (std::uint64_t seed : base.seeds) {
          const std::string tag = "f" + format_double(f);
          detail::CellJob job;
          job.cfg = detail::cell_config(base, task, agent_label, kind_spec, f,
                                        tag);
          job.cell.task = task;
          job.cell.agent_label = agent_label;
          job.cell.param = format_double(f);
          job.cell.fraction = f;
          job.cell.seed = seed;
          jobs.push_back(std::move(job));
        }
      }
    }
  };
  if (base.sweep_include_baseline) add_jobs("cql");
  add_jobs("s4rl(" + kind_spec + ")");
  detail::execute_cells(base, jobs, report);
  return report;
}

}  // namespace s4rl
