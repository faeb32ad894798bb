#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "cpdm/data.hpp"
#include "cpdm/nn/unet.hpp"
#include "cpdm/trainer.hpp"

namespace cpdm::cmd {

/// Exit codes shared by every subcommand: 0 success, 1 runtime failure,
/// 2 usage error. The CLI maps std::invalid_argument to 2 and other
/// exceptions to 1; these functions throw rather than exit.

struct MakeSyntheticOptions {
    std::filesystem::path out;
    int n = 10;
    int size = 64;
    uint64_t seed = 0;
    bool force = false;
    DegradeParams degrade;
};

struct TrainOptions {
    std::filesystem::path dataset;
    std::filesystem::path out;
    ModelConfig model;
    TrainConfig train;
    std::optional<std::filesystem::path> resume;
    int log_every = 100;
};

struct EnhanceOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path input;
    std::filesystem::path out;
    uint64_t seed = 0;
    int trajectory_every = 0;
    std::optional<int> expect_T;  // must match the checkpoint when given
};

struct EvalOptions {
    std::filesystem::path enhanced;
    std::filesystem::path reference;
    std::string dataset_name;
    bool quantize = false;  // score on the 8-bit grid instead of floats
    std::optional<std::filesystem::path> out;
};

struct InspectScheduleOptions {
    int T = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
};

int make_synthetic(const MakeSyntheticOptions& opt, std::ostream& out);
int train(const TrainOptions& opt, std::ostream& out);
int enhance(const EnhanceOptions& opt, std::ostream& out);
int eval(const EvalOptions& opt, std::ostream& out);
int inspect_schedule(const InspectScheduleOptions& opt, std::ostream& out);

}  // namespace cpdm::cmd
