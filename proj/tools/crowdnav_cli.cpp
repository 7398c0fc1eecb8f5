// Command-line surface for the crowd navigation stack: training, evaluation,
// the FoV-sweep and blink experiment protocols, episode replay and a built-in
// selftest. Every run writes a manifest capturing the full configuration and
// seeds, so any reported number can be reproduced from its output directory.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "crowdnav/eval.hpp"
#include "crowdnav/selftest.hpp"
#include "crowdnav/trainer.hpp"

using namespace crowdnav;

namespace {

RunConfig load_config(const std::string& config_path, long long seed_override) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = RunConfig::from_kv(KvConfig::from_file(config_path));
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    return cfg;
}

std::vector<std::pair<std::string, std::string>> manifest_header(
    const std::string& command, const std::vector<std::string>& policies,
    std::uint64_t seed_base, int episodes) {
    std::vector<std::pair<std::string, std::string>> extra;
    extra.emplace_back("command", command);
    std::string joined;
    for (const auto& p : policies) joined += (joined.empty() ? "" : " ") + p;
    if (!joined.empty()) extra.emplace_back("policies", joined);
    extra.emplace_back("eval.seed_base", std::to_string(seed_base));
    if (episodes > 0) extra.emplace_back("eval.episodes_used", std::to_string(episodes));
    return extra;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"crowdnav: belief-aided social navigation simulator and trainer"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand

    std::string config_path;
    long long seed = -1;
    std::string out_dir = "out";
    app.add_option("--config", config_path, "key = value config file");
    app.add_option("--seed", seed, "master seed (overrides the config)");
    app.add_option("--out-dir", out_dir, "output directory");

    // train
    auto* train = app.add_subcommand("train", "train a policy with PPO");
    std::string train_policy = "bnbrl+";
    long long train_steps = -1;
    std::string resume;
    bool quiet = false;
    train->add_option("--policy", train_policy, "bnbrl+ | bnbrl | bndnn | rnn");
    train->add_option("--steps", train_steps, "override train.total_steps");
    train->add_option("--resume", resume, "checkpoint to resume from");
    train->add_flag("--quiet", quiet, "suppress progress lines");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a policy over seeded episodes");
    std::string eval_policy;
    int eval_episodes = -1;
    long long seed_base = 10000;
    bool save_logs = false;
    eval_cmd->add_option("--policy", eval_policy,
                         "orca | untrained | <variant>[:ckpt] | <ckpt>")
        ->required();
    eval_cmd->add_option("--episodes", eval_episodes, "number of episodes");
    eval_cmd->add_option("--seed-base", seed_base, "first episode seed");
    eval_cmd->add_flag("--save-logs", save_logs, "write per-episode logs");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "FoV sweep 270..120 over policies");
    std::vector<std::string> sweep_policies;
    int sweep_episodes = -1;
    long long sweep_seed_base = 10000;
    sweep_cmd->add_option("--policy", sweep_policies, "policy id (repeatable)")->required();
    sweep_cmd->add_option("--episodes", sweep_episodes, "episodes per (policy, fov)");
    sweep_cmd->add_option("--seed-base", sweep_seed_base, "first episode seed");

    // blink
    auto* blink_cmd = app.add_subcommand("blink", "blink robustness table over policies");
    std::vector<std::string> blink_policies;
    int blink_episodes = -1;
    long long blink_seed_base = 10000;
    blink_cmd->add_option("--policy", blink_policies, "policy id (repeatable)")->required();
    blink_cmd->add_option("--episodes", blink_episodes, "episodes per condition");
    blink_cmd->add_option("--seed-base", blink_seed_base, "first episode seed");

    // replay
    auto* replay_cmd = app.add_subcommand("replay", "render an episode log to SVG + trace");
    std::string log_path;
    replay_cmd->add_option("--log", log_path, "episode log file")->required();

    // selftest
    auto* selftest_cmd = app.add_subcommand("selftest", "run built-in sanity checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 1;
    }

    try {
        RunConfig cfg = load_config(config_path, seed);

        if (*train) {
            if (train_steps >= 0) cfg.train.total_steps = train_steps;
            PolicyVariant variant = variant_from_name(train_policy);
            write_manifest(out_dir, cfg,
                           {{"command", "train"},
                            {"policy", train_policy},
                            {"resume", resume.empty() ? "(none)" : resume}});
            TrainResult r = train_loop(cfg, variant, out_dir, resume, quiet);
            std::printf("trained %lld steps; checkpoint: %s\n", r.steps,
                        r.checkpoint_path.c_str());
        } else if (*eval_cmd) {
            ScenarioSpec spec;
            spec.cfg = cfg;
            spec.policy_id = eval_policy;
            spec.n_episodes = eval_episodes > 0 ? eval_episodes : cfg.eval.episodes;
            spec.seed_base = static_cast<std::uint64_t>(seed_base);
            write_manifest(out_dir, cfg,
                           manifest_header("eval", {eval_policy}, spec.seed_base,
                                           spec.n_episodes));
            EvalResult r = run_episodes(spec, save_logs, cfg.eval.threads);
            std::ofstream csv(out_dir + "/metrics.csv");
            csv << metrics_csv(r.metrics);
            if (save_logs) write_episode_logs(out_dir + "/episodes", r.logs);
            std::printf("%s\n", metrics_oneline(r.metrics).c_str());
        } else if (*sweep_cmd) {
            int n = sweep_episodes > 0 ? sweep_episodes : cfg.eval.episodes;
            write_manifest(out_dir, cfg,
                           manifest_header("sweep", sweep_policies,
                                           static_cast<std::uint64_t>(sweep_seed_base), n));
            fov_sweep(cfg, sweep_policies, n, static_cast<std::uint64_t>(sweep_seed_base),
                      out_dir, cfg.eval.threads);
            std::printf("sweep written to %s/sweep.csv (+ SVG charts)\n", out_dir.c_str());
        } else if (*blink_cmd) {
            int n = blink_episodes > 0 ? blink_episodes : cfg.eval.episodes;
            write_manifest(out_dir, cfg,
                           manifest_header("blink", blink_policies,
                                           static_cast<std::uint64_t>(blink_seed_base), n));
            auto rows = blink_eval(cfg, blink_policies, n,
                                   static_cast<std::uint64_t>(blink_seed_base), out_dir,
                                   cfg.eval.threads, true);
            std::printf("%s", blink_table(rows).c_str());
            std::printf("table written to %s/blink.csv\n", out_dir.c_str());
        } else if (*replay_cmd) {
            replay_log(log_path, out_dir);
            std::printf("replay written under %s\n", out_dir.c_str());
        } else if (*selftest_cmd) {
            int failures = selftest();
            if (failures > 0) {
                std::fprintf(stderr, "selftest: %d check(s) failed\n", failures);
                return 2;
            }
            std::printf("selftest: all checks passed\n");
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
