#include "cpdm/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <ostream>

#include "cpdm/checkpoint.hpp"
#include "cpdm/imageio.hpp"
#include "cpdm/metrics.hpp"
#include "cpdm/sampler.hpp"
#include "cpdm/schedule.hpp"

namespace cpdm::cmd {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void write_run_config(const fs::path& dir, const json& resolved) {
    std::ofstream f(dir / "run_config.json");
    if (!f)
        throw std::runtime_error("cannot write run_config.json under " +
                                 dir.string());
    f << resolved.dump(2) << "\n";
}

json model_keys(const ModelConfig& m) {
    return json{{"model.base_channels", m.base_channels},
                {"model.channel_multipliers", m.channel_multipliers},
                {"model.blocks_per_level", m.blocks_per_level},
                {"model.time_embed_dim", m.time_embed_dim},
                {"model.use_difference_condition", m.use_difference_condition},
                {"model.use_ccm", m.use_ccm}};
}

std::vector<fs::path> list_pngs(const fs::path& dir) {
    if (!fs::is_directory(dir))
        throw std::runtime_error("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png")
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace

int make_synthetic(const MakeSyntheticOptions& opt, std::ostream& out) {
    if (opt.out.empty()) throw std::invalid_argument("--out is required");
    if (opt.n < 1) throw std::invalid_argument("--n must be >= 1");
    if (fs::exists(opt.out / "manifest.json") && !opt.force)
        throw std::runtime_error("dataset already exists at " +
                                 opt.out.string() +
                                 " (pass --force to regenerate)");

    DatasetManifest m = make_synthetic_dataset(opt.out, opt.n, opt.size,
                                               opt.degrade, opt.seed);
    write_run_config(opt.out,
                     json{{"command", "make-synthetic"},
                          {"n", opt.n},
                          {"size", opt.size},
                          {"seed", opt.seed},
                          {"degrade.attenuation", opt.degrade.attenuation},
                          {"degrade.haze_color", opt.degrade.haze_color},
                          {"degrade.haze_strength", opt.degrade.haze_strength},
                          {"degrade.noise_sigma", opt.degrade.noise_sigma}});
    out << (m.root / "manifest.json").string() << "\n";
    return 0;
}

int train(const TrainOptions& opt, std::ostream& out) {
    opt.model.validate(/*strict_levels=*/true);
    opt.train.validate();

    DatasetManifest manifest = read_manifest(opt.dataset);
    std::vector<PairedSample> dataset = load_dataset(manifest);

    fs::create_directories(opt.out);
    json resolved = model_keys(opt.model);
    resolved.update(json{{"command", "train"},
                         {"data.root", opt.dataset.string()},
                         {"train.total_steps", opt.train.total_steps},
                         {"train.batch_size", opt.train.batch_size},
                         {"train.learning_rate", opt.train.learning_rate},
                         {"train.seed", opt.train.seed},
                         {"train.checkpoint_every", opt.train.checkpoint_every},
                         {"train.T", opt.train.T},
                         {"train.beta_start", opt.train.beta_start},
                         {"train.beta_end", opt.train.beta_end}});
    if (opt.resume) resolved["resume"] = opt.resume->string();
    write_run_config(opt.out, resolved);

    const fs::path* resume = opt.resume ? &*opt.resume : nullptr;
    TrainLoopResult res = train_loop(
        dataset, opt.model, opt.train, opt.out, resume,
        [&](const TrainStepReport& r) {
            if (opt.log_every > 0 && (r.step % opt.log_every == 0 || r.step == 1))
                out << "step " << r.step << "  loss " << std::setprecision(6)
                    << r.loss << "  |grad| " << r.grad_norm << "\n";
        });
    out << "final checkpoint: " << res.final_checkpoint.string() << "\n";
    return 0;
}

int enhance(const EnhanceOptions& opt, std::ostream& out) {
    LoadedCheckpoint ck = load_checkpoint(opt.checkpoint);
    if (opt.expect_T && *opt.expect_T != ck.info.T)
        throw std::runtime_error(
            "schedule mismatch: checkpoint was trained with T=" +
            std::to_string(ck.info.T) + ", requested T=" +
            std::to_string(*opt.expect_T));
    NoiseSchedule sched =
        NoiseSchedule::linear(ck.info.T, ck.info.beta_start, ck.info.beta_end);

    std::vector<fs::path> files = list_pngs(opt.input);
    if (files.empty())
        throw std::runtime_error("no .png files under " + opt.input.string());
    fs::create_directories(opt.out);

    for (size_t i = 0; i < files.size(); ++i) {
        Image y0 = to_model_space(io::load_png(files[i]));
        SampleConfig scfg;
        scfg.seed = opt.seed + i;  // per-image stream, independent of order
        scfg.trajectory_every = opt.trajectory_every;
        SampleTrace<float> trace;
        Image x0 = sample(*ck.model, scfg, y0, sched,
                          opt.trajectory_every > 0 ? &trace : nullptr);
        io::save_png(opt.out / files[i].filename(), to_metric_space(x0));

        if (opt.trajectory_every > 0) {
            const fs::path tdir =
                opt.out / "trajectory" / files[i].stem().string();
            fs::create_directories(tdir);
            for (const auto& [t, xt] : trace.snapshots) {
                char name[32];
                std::snprintf(name, sizeof(name), "step_%06d.png", t);
                io::save_png(tdir / name, to_metric_space(xt));
            }
        }
        out << files[i].filename().string() << " -> "
            << (opt.out / files[i].filename()).string() << "\n";
    }

    write_run_config(opt.out, json{{"command", "enhance"},
                                   {"checkpoint", opt.checkpoint.string()},
                                   {"input", opt.input.string()},
                                   {"seed", opt.seed},
                                   {"trajectory_every", opt.trajectory_every},
                                   {"schedule.T", ck.info.T},
                                   {"schedule.beta_start", ck.info.beta_start},
                                   {"schedule.beta_end", ck.info.beta_end}});
    return 0;
}

int eval(const EvalOptions& opt, std::ostream& out) {
    std::vector<fs::path> files = list_pngs(opt.enhanced);
    if (files.empty())
        throw std::runtime_error("no .png files under " + opt.enhanced.string());

    MetricReport report;
    report.dataset_name = opt.dataset_name;
    for (const auto& f : files) {
        const fs::path ref_path = opt.reference / f.filename();
        if (!fs::exists(ref_path))
            throw std::runtime_error("no reference image for " +
                                     f.filename().string());
        Image a = io::load_png(f);
        Image b = io::load_png(ref_path);
        if (opt.quantize) {
            a = io::quantize_u8(a);
            b = io::quantize_u8(b);
        }
        report.per_image.push_back(
            {f.stem().string(), psnr(a, b), ssim(a, b), mse(a, b)});
    }

    out << report.to_csv() << "\n" << report.to_table();

    if (opt.out) {
        fs::create_directories(*opt.out);
        std::ofstream csv(*opt.out / "metrics.csv");
        csv << report.to_csv();
        write_run_config(*opt.out,
                         json{{"command", "eval"},
                              {"enhanced", opt.enhanced.string()},
                              {"reference", opt.reference.string()},
                              {"quantize", opt.quantize},
                              {"dataset_name", opt.dataset_name}});
    }
    return 0;
}

int inspect_schedule(const InspectScheduleOptions& opt, std::ostream& out) {
    NoiseSchedule s = NoiseSchedule::linear(opt.T, opt.beta_start, opt.beta_end);
    out << "t,beta,alpha_bar,posterior_variance\n";
    out << std::setprecision(12);
    for (int t = 1; t <= s.steps(); ++t)
        out << t << ',' << s.beta(t) << ',' << s.alpha_bar(t) << ','
            << s.posterior_variance(t) << '\n';
    return 0;
}

}  // namespace cpdm::cmd
