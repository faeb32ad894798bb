#include "cpdm/trainer.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace cpdm {

namespace fs = std::filesystem;

namespace {

std::string step_dir_name(int64_t step) {
    std::ostringstream os;
    os << "step_" << std::setfill('0') << std::setw(6) << step;
    return os.str();
}

TrainBatch<float> draw_batch(const std::vector<PairedSample>& dataset,
                             const TrainConfig& cfg, int64_t step,
                             std::vector<size_t>* indices_out) {
    const int B = cfg.batch_size;
    const auto& first = dataset.front();
    const int C = first.x0.t.c, H = first.x0.t.h, W = first.x0.t.w;

    Rng order = Rng::stream(cfg.seed, Rng::Role::DataOrder, static_cast<uint64_t>(step));
    Rng tdraw = Rng::stream(cfg.seed, Rng::Role::Timesteps, static_cast<uint64_t>(step));
    Rng noise = Rng::stream(cfg.seed, Rng::Role::TrainNoise, static_cast<uint64_t>(step));

    TrainBatch<float> batch;
    batch.x0 = {Tensor(B, C, H, W), Space::Model};
    batch.y0 = {Tensor(B, C, H, W), Space::Model};
    batch.t.resize(B);
    const size_t plane = static_cast<size_t>(C) * H * W;
    for (int b = 0; b < B; ++b) {
        const size_t idx = static_cast<size_t>(
            order.uniform_int(0, static_cast<int64_t>(dataset.size()) - 1));
        if (indices_out) indices_out->push_back(idx);
        std::copy_n(dataset[idx].x0.t.data(), plane,
                    batch.x0.t.data() + b * plane);
        std::copy_n(dataset[idx].y0.t.data(), plane,
                    batch.y0.t.data() + b * plane);
        batch.t[b] = static_cast<int>(tdraw.uniform_int(1, cfg.T));
    }
    batch.eps = Tensor(B, C, H, W);
    noise.fill_normal(batch.eps);
    return batch;
}

}  // namespace

TrainLoopResult train_loop(
    const std::vector<PairedSample>& dataset, const ModelConfig& mcfg,
    const TrainConfig& tcfg, const fs::path& checkpoint_dir,
    const fs::path* resume_from,
    const std::function<void(const TrainStepReport&)>& on_step) {
    tcfg.validate();
    if (dataset.empty())
        throw std::invalid_argument("train_loop: empty dataset");
    fs::create_directories(checkpoint_dir);

    std::unique_ptr<nn::UNet<float>> model;
    Adam<float> opt(tcfg.learning_rate);
    int64_t start_step = 0;

    if (resume_from) {
        LoadedCheckpoint ck = load_checkpoint(*resume_from);
        if (!(ck.info.model == mcfg))
            throw std::runtime_error(
                "train_loop: checkpoint model config differs from the "
                "requested one");
        if (ck.info.T != tcfg.T)
            throw std::runtime_error("train_loop: checkpoint T differs");
        model = std::move(ck.model);
        opt.attach(model->params());
        if (ck.has_optimizer) opt.import_state(ck.opt);
        start_step = ck.info.step;
    } else {
        model = std::make_unique<nn::UNet<float>>(mcfg);
        model->init(tcfg.seed);
        opt.attach(model->params());
    }

    NoiseSchedule sched =
        NoiseSchedule::linear(tcfg.T, tcfg.beta_start, tcfg.beta_end);

    const fs::path log_path = checkpoint_dir / "train_log.csv";
    std::ofstream log;
    if (resume_from && fs::exists(log_path)) {
        log.open(log_path, std::ios::app);
    } else {
        log.open(log_path);
        log << "step,loss,grad_norm,wall_time_ms\n";
    }
    if (!log)
        throw std::runtime_error("train_loop: cannot open " + log_path.string());

    auto write_checkpoint = [&](const fs::path& dir, int64_t step) {
        CheckpointInfo info{mcfg, tcfg.T, tcfg.beta_start, tcfg.beta_end, step,
                            tcfg.seed};
        OptimizerState st = opt.export_state();
        save_checkpoint(dir, *model, info, &st);
    };

    TrainLoopResult result;
    for (int64_t step = start_step + 1; step <= tcfg.total_steps; ++step) {
        std::vector<size_t> indices;
        TrainBatch<float> batch = draw_batch(dataset, tcfg, step, &indices);
        TrainStepReport rep;
        try {
            rep = train_step(*model, opt, batch, sched);
        } catch (const std::exception& e) {
            std::string ids;
            for (size_t idx : indices) ids += dataset[idx].id + " ";
            throw std::runtime_error("train_loop: abort at step " +
                                     std::to_string(step) + ": " + e.what() +
                                     "; sample ids: " + ids);
        }
        rep.step = step;
        log << rep.step << ',' << std::setprecision(10) << rep.loss << ','
            << rep.grad_norm << ',' << rep.wall_time_ms << '\n';
        if (on_step) on_step(rep);
        result.last_loss = rep.loss;
        ++result.steps_run;

        if (step % tcfg.checkpoint_every == 0 && step != tcfg.total_steps)
            write_checkpoint(checkpoint_dir / step_dir_name(step), step);
    }

    result.final_checkpoint = checkpoint_dir / "final";
    write_checkpoint(result.final_checkpoint, tcfg.total_steps);
    return result;
}

}  // namespace cpdm
