#include <CLI11.hpp>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>

#include "cpdm/commands.hpp"

using nlohmann::json;
namespace cmd = cpdm::cmd;

namespace {

// Config-file support: a flat JSON object with dotted keys. Values fill any
// option the user did not pass on the command line; flags always win.
struct ConfigBinding {
    std::map<std::string, std::pair<CLI::Option*, std::function<void(const json&)>>> keys;

    void add(const std::string& key, CLI::Option* opt,
             std::function<void(const json&)> apply) {
        keys[key] = {opt, std::move(apply)};
    }

    void apply_file(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("cannot open config file " + path);
        json j;
        f >> j;
        if (!j.is_object())
            throw std::invalid_argument("config file must hold a JSON object");
        for (const auto& [key, value] : j.items()) {
            auto it = keys.find(key);
            if (it == keys.end())
                throw std::invalid_argument("config: unknown key '" + key + "'");
            if (it->second.first->count() == 0) it->second.second(value);
        }
    }
};

std::array<double, 3> to_rgb(const std::vector<double>& v, const char* flag) {
    if (v.size() != 3)
        throw std::invalid_argument(std::string(flag) + " needs three values");
    return {v[0], v[1], v[2]};
}

int run_guarded(const std::function<int()>& fn) {
    try {
        return fn();
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Content-preserving conditional diffusion for underwater "
                 "image enhancement"};
    app.require_subcommand(1);

    // --- make-synthetic ---------------------------------------------------
    cmd::MakeSyntheticOptions ms;
    std::vector<double> ms_atten{ms.degrade.attenuation.begin(),
                                 ms.degrade.attenuation.end()};
    std::vector<double> ms_haze{ms.degrade.haze_color.begin(),
                                ms.degrade.haze_color.end()};
    std::string ms_config, ms_out;
    auto* c_ms = app.add_subcommand(
        "make-synthetic", "Generate a paired synthetic degradation dataset");
    ConfigBinding ms_bind;
    {
        auto* o_out = c_ms->add_option("--out", ms_out, "Dataset root directory")
                          ->required();
        auto* o_n = c_ms->add_option("--n", ms.n, "Number of image pairs");
        auto* o_size = c_ms->add_option("--size", ms.size, "Square image size");
        auto* o_seed = c_ms->add_option("--seed", ms.seed, "Generation seed");
        auto* o_force =
            c_ms->add_flag("--force", ms.force, "Overwrite an existing dataset");
        auto* o_at = c_ms->add_option("--attenuation", ms_atten,
                                      "Per-channel attenuation (r,g,b)")
                         ->delimiter(',')
                         ->expected(3);
        auto* o_hc = c_ms->add_option("--haze-color", ms_haze,
                                      "Additive veil color (r,g,b)")
                         ->delimiter(',')
                         ->expected(3);
        auto* o_hs = c_ms->add_option("--haze-strength",
                                      ms.degrade.haze_strength, "Veil mix in [0,1)");
        auto* o_ns = c_ms->add_option("--noise-sigma", ms.degrade.noise_sigma,
                                      "Gaussian sensor noise sigma");
        c_ms->add_option("--config", ms_config, "JSON config file (flat dotted keys)");

        ms_bind.add("out", o_out, [&](const json& v) { ms_out = v.get<std::string>(); });
        ms_bind.add("n", o_n, [&](const json& v) { ms.n = v.get<int>(); });
        ms_bind.add("size", o_size, [&](const json& v) { ms.size = v.get<int>(); });
        ms_bind.add("seed", o_seed, [&](const json& v) { ms.seed = v.get<uint64_t>(); });
        ms_bind.add("force", o_force, [&](const json& v) { ms.force = v.get<bool>(); });
        ms_bind.add("degrade.attenuation", o_at,
                    [&](const json& v) { ms_atten = v.get<std::vector<double>>(); });
        ms_bind.add("degrade.haze_color", o_hc,
                    [&](const json& v) { ms_haze = v.get<std::vector<double>>(); });
        ms_bind.add("degrade.haze_strength", o_hs,
                    [&](const json& v) { ms.degrade.haze_strength = v.get<double>(); });
        ms_bind.add("degrade.noise_sigma", o_ns,
                    [&](const json& v) { ms.degrade.noise_sigma = v.get<double>(); });

        c_ms->callback([&]() {
            if (!ms_config.empty()) ms_bind.apply_file(ms_config);
            ms.out = ms_out;
            ms.degrade.attenuation = to_rgb(ms_atten, "--attenuation");
            ms.degrade.haze_color = to_rgb(ms_haze, "--haze-color");
        });
    }

    // --- train --------------------------------------------------------------
    cmd::TrainOptions tr;
    std::string tr_data, tr_out, tr_resume, tr_config;
    bool tr_no_diff = false, tr_no_ccm = false;
    auto* c_tr = app.add_subcommand("train", "Train the noise predictor");
    ConfigBinding tr_bind;
    {
        auto* o_data =
            c_tr->add_option("--data", tr_data, "Dataset root (with manifest.json)")
                ->required();
        auto* o_out = c_tr->add_option("--out", tr_out,
                                       "Output directory for checkpoints and logs")
                          ->required();
        auto* o_steps = c_tr->add_option("--steps", tr.train.total_steps,
                                         "Total optimizer steps");
        auto* o_batch = c_tr->add_option("--batch", tr.train.batch_size, "Batch size");
        auto* o_lr = c_tr->add_option("--lr", tr.train.learning_rate, "Learning rate");
        auto* o_seed = c_tr->add_option("--seed", tr.train.seed, "Training seed");
        auto* o_ck = c_tr->add_option("--checkpoint-every",
                                      tr.train.checkpoint_every, "Checkpoint period");
        auto* o_T = c_tr->add_option("--T", tr.train.T, "Diffusion steps");
        auto* o_bs = c_tr->add_option("--beta-start", tr.train.beta_start,
                                      "Schedule beta at t=1");
        auto* o_be = c_tr->add_option("--beta-end", tr.train.beta_end,
                                      "Schedule beta at t=T");
        auto* o_bc = c_tr->add_option("--base-channels", tr.model.base_channels,
                                      "UNet base channel count");
        auto* o_cm = c_tr->add_option("--channel-multipliers",
                                      tr.model.channel_multipliers,
                                      "Per-level channel multipliers")
                         ->delimiter(',');
        auto* o_bl = c_tr->add_option("--blocks", tr.model.blocks_per_level,
                                      "Residual blocks per level");
        auto* o_td = c_tr->add_option("--time-embed-dim", tr.model.time_embed_dim,
                                      "Time embedding width");
        auto* o_nd = c_tr->add_flag("--no-diff-cond", tr_no_diff,
                                    "Drop the difference-image condition "
                                    "(ablation variants A and C)");
        auto* o_nc = c_tr->add_flag("--no-ccm", tr_no_ccm,
                                    "Drop the content compensation pyramid "
                                    "(ablation variants A and B)");
        auto* o_res = c_tr->add_option("--resume", tr_resume,
                                       "Checkpoint directory to resume from");
        auto* o_log = c_tr->add_option("--log-every", tr.log_every,
                                       "Progress print period (0 = silent)");
        c_tr->add_option("--config", tr_config, "JSON config file (flat dotted keys)");

        tr_bind.add("data.root", o_data, [&](const json& v) { tr_data = v.get<std::string>(); });
        tr_bind.add("out", o_out, [&](const json& v) { tr_out = v.get<std::string>(); });
        tr_bind.add("train.total_steps", o_steps,
                    [&](const json& v) { tr.train.total_steps = v.get<int64_t>(); });
        tr_bind.add("train.batch_size", o_batch,
                    [&](const json& v) { tr.train.batch_size = v.get<int>(); });
        tr_bind.add("train.learning_rate", o_lr,
                    [&](const json& v) { tr.train.learning_rate = v.get<double>(); });
        tr_bind.add("train.seed", o_seed,
                    [&](const json& v) { tr.train.seed = v.get<uint64_t>(); });
        tr_bind.add("train.checkpoint_every", o_ck,
                    [&](const json& v) { tr.train.checkpoint_every = v.get<int64_t>(); });
        tr_bind.add("train.T", o_T, [&](const json& v) { tr.train.T = v.get<int>(); });
        tr_bind.add("train.beta_start", o_bs,
                    [&](const json& v) { tr.train.beta_start = v.get<double>(); });
        tr_bind.add("train.beta_end", o_be,
                    [&](const json& v) { tr.train.beta_end = v.get<double>(); });
        tr_bind.add("model.base_channels", o_bc,
                    [&](const json& v) { tr.model.base_channels = v.get<int>(); });
        tr_bind.add("model.channel_multipliers", o_cm, [&](const json& v) {
            tr.model.channel_multipliers = v.get<std::vector<int>>();
        });
        tr_bind.add("model.blocks_per_level", o_bl,
                    [&](const json& v) { tr.model.blocks_per_level = v.get<int>(); });
        tr_bind.add("model.time_embed_dim", o_td,
                    [&](const json& v) { tr.model.time_embed_dim = v.get<int>(); });
        tr_bind.add("model.use_difference_condition", o_nd,
                    [&](const json& v) { tr_no_diff = !v.get<bool>(); });
        tr_bind.add("model.use_ccm", o_nc,
                    [&](const json& v) { tr_no_ccm = !v.get<bool>(); });
        tr_bind.add("resume", o_res,
                    [&](const json& v) { tr_resume = v.get<std::string>(); });
        tr_bind.add("log_every", o_log,
                    [&](const json& v) { tr.log_every = v.get<int>(); });

        c_tr->callback([&]() {
            if (!tr_config.empty()) tr_bind.apply_file(tr_config);
            tr.dataset = tr_data;
            tr.out = tr_out;
            tr.model.use_difference_condition = !tr_no_diff;
            tr.model.use_ccm = !tr_no_ccm;
            if (!tr_resume.empty()) tr.resume = tr_resume;
        });
    }

    // --- enhance ------------------------------------------------------------
    cmd::EnhanceOptions en;
    std::string en_ckpt, en_in, en_out, en_config;
    int en_T = -1;
    auto* c_en = app.add_subcommand(
        "enhance", "Sample enhanced images for a directory of raw PNGs");
    ConfigBinding en_bind;
    {
        auto* o_ck = c_en->add_option("--checkpoint", en_ckpt,
                                      "Trained checkpoint directory")
                         ->required();
        auto* o_in = c_en->add_option("--in", en_in, "Directory of raw PNGs")
                         ->required();
        auto* o_out =
            c_en->add_option("--out", en_out, "Output directory")->required();
        auto* o_seed = c_en->add_option("--seed", en.seed, "Sampling seed");
        auto* o_tj = c_en->add_option("--trajectory-every", en.trajectory_every,
                                      "Dump intermediate states every k steps");
        auto* o_T = c_en->add_option(
            "--T", en_T, "Expected diffusion steps (must match checkpoint)");
        c_en->add_option("--config", en_config, "JSON config file (flat dotted keys)");

        en_bind.add("checkpoint", o_ck,
                    [&](const json& v) { en_ckpt = v.get<std::string>(); });
        en_bind.add("input", o_in, [&](const json& v) { en_in = v.get<std::string>(); });
        en_bind.add("out", o_out, [&](const json& v) { en_out = v.get<std::string>(); });
        en_bind.add("seed", o_seed, [&](const json& v) { en.seed = v.get<uint64_t>(); });
        en_bind.add("trajectory_every", o_tj,
                    [&](const json& v) { en.trajectory_every = v.get<int>(); });
        en_bind.add("T", o_T, [&](const json& v) { en_T = v.get<int>(); });

        c_en->callback([&]() {
            if (!en_config.empty()) en_bind.apply_file(en_config);
            en.checkpoint = en_ckpt;
            en.input = en_in;
            en.out = en_out;
            if (en_T >= 0) en.expect_T = en_T;
        });
    }

    // --- eval ---------------------------------------------------------------
    cmd::EvalOptions ev;
    std::string ev_a, ev_b, ev_out, ev_config;
    auto* c_ev = app.add_subcommand(
        "eval", "Full-reference metrics over two directories of PNGs");
    ConfigBinding ev_bind;
    {
        auto* o_a = c_ev->add_option("--enhanced", ev_a,
                                     "Directory of images to score")
                        ->required();
        auto* o_b = c_ev->add_option("--ref", ev_b,
                                     "Directory of reference images")
                        ->required();
        auto* o_n = c_ev->add_option("--name", ev.dataset_name, "Dataset label");
        auto* o_q = c_ev->add_flag("--quantize", ev.quantize,
                                   "Score on the 8-bit grid");
        auto* o_o = c_ev->add_option("--out", ev_out,
                                     "Also write metrics.csv to this directory");
        c_ev->add_option("--config", ev_config, "JSON config file (flat dotted keys)");

        ev_bind.add("enhanced", o_a, [&](const json& v) { ev_a = v.get<std::string>(); });
        ev_bind.add("reference", o_b, [&](const json& v) { ev_b = v.get<std::string>(); });
        ev_bind.add("dataset_name", o_n,
                    [&](const json& v) { ev.dataset_name = v.get<std::string>(); });
        ev_bind.add("quantize", o_q, [&](const json& v) { ev.quantize = v.get<bool>(); });
        ev_bind.add("out", o_o, [&](const json& v) { ev_out = v.get<std::string>(); });

        c_ev->callback([&]() {
            if (!ev_config.empty()) ev_bind.apply_file(ev_config);
            ev.enhanced = ev_a;
            ev.reference = ev_b;
            if (!ev_out.empty()) ev.out = ev_out;
        });
    }

    // --- inspect-schedule -----------------------------------------------
    cmd::InspectScheduleOptions is;
    std::string is_config;
    auto* c_is = app.add_subcommand("inspect-schedule",
                                    "Dump the noise schedule as CSV");
    ConfigBinding is_bind;
    {
        auto* o_T = c_is->add_option("--T", is.T, "Diffusion steps");
        auto* o_bs = c_is->add_option("--beta-start", is.beta_start,
                                      "Schedule beta at t=1");
        auto* o_be =
            c_is->add_option("--beta-end", is.beta_end, "Schedule beta at t=T");
        c_is->add_option("--config", is_config, "JSON config file (flat dotted keys)");

        is_bind.add("T", o_T, [&](const json& v) { is.T = v.get<int>(); });
        is_bind.add("beta_start", o_bs,
                    [&](const json& v) { is.beta_start = v.get<double>(); });
        is_bind.add("beta_end", o_be,
                    [&](const json& v) { is.beta_end = v.get<double>(); });

        c_is->callback([&]() {
            if (!is_config.empty()) is_bind.apply_file(is_config);
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // exits 0 after printing help
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\nRun with --help for usage.\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    if (c_ms->parsed())
        return run_guarded([&] { return cmd::make_synthetic(ms, std::cout); });
    if (c_tr->parsed())
        return run_guarded([&] { return cmd::train(tr, std::cout); });
    if (c_en->parsed())
        return run_guarded([&] { return cmd::enhance(en, std::cout); });
    if (c_ev->parsed())
        return run_guarded([&] { return cmd::eval(ev, std::cout); });
    if (c_is->parsed())
        return run_guarded([&] { return cmd::inspect_schedule(is, std::cout); });
    return 2;
}
