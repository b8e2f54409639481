// Command-line driver: replay, train-predictor, train-agent, evaluate, report.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "pamm/sim.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kConvergence = 2;

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool price_column = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "JSON configuration file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "Override the configured seed");
    cmd->add_option("--out", f.out, "Override the output directory");
    cmd->add_flag("--price-column", f.price_column, "Input CSV carries raw prices in a 'price' column");
}

pamm::SimConfig resolve(const CommonFlags& f) {
    pamm::SimConfig cfg = pamm::load_config(f.config);
    if (f.seed) cfg.seed = *f.seed;
    if (!f.out.empty()) cfg.out_dir = f.out;
    if (f.price_column) cfg.data.price_column = true;
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    pamm::write_text(fs::path(cfg.out_dir) / "config.json", pamm::config_to_json(cfg).dump(2) + "\n");
    return cfg;
}

int replay(const CommonFlags& f) {
    const auto cfg = resolve(f);
    const auto series = pamm::load_series(cfg);
    std::optional<pamm::Predictor> model;
    if (!cfg.predictor.checkpoint.empty()) model.emplace(pamm::load_predictor(cfg.predictor.checkpoint));
    const auto result = pamm::run_replay(cfg, series, model ? &*model : nullptr);
    pamm::write_replay_outputs(cfg.out_dir, result);
    const pamm::Json summary{{"command", "replay"},
                             {"centering", model ? "predictive" : "look_back"},
                             {"report", pamm::report_to_json(result.report)}};
    pamm::write_text(fs::path(cfg.out_dir) / "summary.json", summary.dump(2) + "\n");
    std::cout << summary.dump(2) << '\n';
    return kOk;
}

int train_predictor(const CommonFlags& f) {
    const auto cfg = resolve(f);
    const auto series = pamm::load_series(cfg);
    const auto r = pamm::run_train_predictor(cfg, series, cfg.out_dir);
    const pamm::Json summary{{"command", "train-predictor"},
                             {"epochs_done", r.epochs_done},
                             {"final_mae", r.final_mae},
                             {"target_mae", cfg.predictor.target_mae},
                             {"converged", r.converged}};
    pamm::write_text(fs::path(cfg.out_dir) / "train_predictor.json", summary.dump(2) + "\n");
    std::cout << summary.dump(2) << '\n';
    return r.converged ? kOk : kConvergence;
}

int train_agent(const CommonFlags& f) {
    const auto cfg = resolve(f);
    const auto r = pamm::run_train_agent(cfg, cfg.out_dir);
    const pamm::Json summary{{"command", "train-agent"},
                             {"environment", cfg.agent.environment},
                             {"steps", r.rows.size()},
                             {"updates", r.updates},
                             {"dominant_fraction", r.dominant_fraction},
                             {"converged", r.converged}};
    pamm::write_text(fs::path(cfg.out_dir) / "train_agent.json", summary.dump(2) + "\n");
    std::cout << summary.dump(2) << '\n';
    return r.converged ? kOk : kConvergence;
}

int evaluate(const CommonFlags& f) {
    const auto cfg = resolve(f);
    const auto series = pamm::load_series(cfg);
    const auto model = pamm::load_predictor(pamm::predictor_checkpoint_path(cfg));
    const auto r = pamm::run_evaluate(cfg, series, model);
    pamm::write_replay_outputs(cfg.out_dir, r.predictive, "ticks_predictive");
    pamm::write_replay_outputs(cfg.out_dir, r.look_back, "ticks_look_back");
    pamm::Json summary = pamm::evaluate_to_json(r);
    summary["command"] = "evaluate";
    pamm::write_text(fs::path(cfg.out_dir) / "evaluate.json", summary.dump(2) + "\n");
    std::cout << summary.dump(2) << '\n';
    return kOk;
}

int report(const std::string& dir, const std::string& stem) {
    const fs::path csv = fs::path(dir) / (stem + ".csv");
    std::ifstream in(csv);
    if (!in) throw pamm::DataError("cannot open " + csv.string());
    const auto rows = pamm::read_ticks_csv(in, csv.string());
    const pamm::Json rebuilt = pamm::report_to_json(pamm::aggregate(rows));
    std::cout << rebuilt.dump(2) << '\n';
    const fs::path summary_path = fs::path(dir) / "summary.json";
    if (stem == "ticks" && fs::exists(summary_path)) {
        std::ifstream s(summary_path);
        const auto stored = pamm::Json::parse(s);
        if (stored.at("report") != rebuilt) {
            std::cerr << "report: summary.json does not match the per-tick CSV\n";
            return kValidation;
        }
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Predictive AMM laboratory"};
    app.require_subcommand(1);
    CommonFlags flags;
    std::string report_dir;
    std::string report_stem = "ticks";

    auto* replay_cmd = app.add_subcommand("replay", "Replay a price series with and without pseudo-arbitrage");
    add_common(replay_cmd, flags);
    auto* tp_cmd = app.add_subcommand("train-predictor", "Train or resume the valuation predictor");
    add_common(tp_cmd, flags);
    auto* ta_cmd = app.add_subcommand("train-agent", "Train the Q-learning agent");
    add_common(ta_cmd, flags);
    auto* eval_cmd = app.add_subcommand("evaluate", "Compare predictive and look-back fee centering");
    add_common(eval_cmd, flags);
    auto* report_cmd = app.add_subcommand("report", "Re-aggregate a run's per-tick CSV");
    report_cmd->add_option("--out", report_dir, "Run directory")->required();
    report_cmd->add_option("--stem", report_stem, "CSV stem inside the run directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    try {
        if (*replay_cmd) return replay(flags);
        if (*tp_cmd) return train_predictor(flags);
        if (*ta_cmd) return train_agent(flags);
        if (*eval_cmd) return evaluate(flags);
        if (*report_cmd) return report(report_dir, report_stem);
    } catch (const pamm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kValidation;
    } catch (const pamm::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kValidation;
    }
    return kValidation;
}
