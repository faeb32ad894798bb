#include "cpdm/checkpoint.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace cpdm {

using nlohmann::json;

namespace {

json config_to_json(const ModelConfig& m) {
    return json{{"base_channels", m.base_channels},
                {"channel_multipliers", m.channel_multipliers},
                {"blocks_per_level", m.blocks_per_level},
                {"time_embed_dim", m.time_embed_dim},
                {"use_difference_condition", m.use_difference_condition},
                {"use_ccm", m.use_ccm},
                {"in_channels", m.in_channels()},
                {"out_channels", m.out_channels}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig m;
    m.base_channels = j.at("base_channels").get<int>();
    m.channel_multipliers = j.at("channel_multipliers").get<std::vector<int>>();
    m.blocks_per_level = j.at("blocks_per_level").get<int>();
    m.time_embed_dim = j.at("time_embed_dim").get<int>();
    m.use_difference_condition = j.at("use_difference_condition").get<bool>();
    m.use_ccm = j.at("use_ccm").get<bool>();
    m.out_channels = j.at("out_channels").get<int>();
    if (j.at("in_channels").get<int>() != m.in_channels())
        throw std::runtime_error(
            "checkpoint: in_channels in manifest contradicts the condition "
            "flags");
    return m;
}

void write_floats(const std::filesystem::path& path,
                  const std::vector<float>& data) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!f) throw std::runtime_error("checkpoint: short write to " + path.string());
}

void read_floats(const std::filesystem::path& path, std::vector<float>& data) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw std::runtime_error("checkpoint: cannot read " + path.string());
    const auto bytes = static_cast<size_t>(f.tellg());
    if (bytes != data.size() * sizeof(float))
        throw std::runtime_error("checkpoint: " + path.string() + " holds " +
                                 std::to_string(bytes / sizeof(float)) +
                                 " floats, expected " +
                                 std::to_string(data.size()));
    f.seekg(0);
    f.read(reinterpret_cast<char*>(data.data()),
           static_cast<std::streamsize>(bytes));
    if (!f) throw std::runtime_error("checkpoint: short read from " + path.string());
}

json load_manifest(const std::filesystem::path& dir) {
    std::ifstream f(dir / "manifest.json");
    if (!f)
        throw std::runtime_error("checkpoint: no manifest.json under " +
                                 dir.string());
    json j;
    f >> j;
    if (j.at("format").get<std::string>() != "cpdm-checkpoint-v1")
        throw std::runtime_error("checkpoint: unknown format tag");
    return j;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir,
                     const nn::UNet<float>& model, const CheckpointInfo& info,
                     const OptimizerState* opt) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "params");

    json params = json::array();
    for (const nn::ParamT<float>* p : model.params()) {
        const std::string file = "params/" + p->name + ".bin";
        write_floats(dir / file, p->value);
        params.push_back({{"name", p->name}, {"shape", p->shape}, {"file", file}});
    }

    json manifest{{"format", "cpdm-checkpoint-v1"},
                  {"dtype", "float32"},
                  {"step", info.step},
                  {"seed", info.seed},
                  {"model", config_to_json(info.model)},
                  {"schedule",
                   {{"T", info.T},
                    {"beta_start", info.beta_start},
                    {"beta_end", info.beta_end}}},
                  {"params", params}};

    if (opt) {
        fs::create_directories(dir / "opt_m");
        fs::create_directories(dir / "opt_v");
        const auto& reg = model.params();
        for (size_t i = 0; i < reg.size(); ++i) {
            write_floats(dir / "opt_m" / (reg[i]->name + ".bin"), opt->m[i]);
            write_floats(dir / "opt_v" / (reg[i]->name + ".bin"), opt->v[i]);
        }
        manifest["optimizer"] = {{"type", "adam"}, {"step", opt->step}};
    }

    std::ofstream f(dir / "manifest.json");
    if (!f)
        throw std::runtime_error("checkpoint: cannot write manifest under " +
                                 dir.string());
    f << manifest.dump(2) << "\n";
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
    json j = load_manifest(dir);

    LoadedCheckpoint out;
    out.info.model = config_from_json(j.at("model"));
    out.info.T = j.at("schedule").at("T").get<int>();
    out.info.beta_start = j.at("schedule").at("beta_start").get<double>();
    out.info.beta_end = j.at("schedule").at("beta_end").get<double>();
    out.info.step = j.at("step").get<int64_t>();
    out.info.seed = j.at("seed").get<uint64_t>();

    out.model = std::make_unique<nn::UNet<float>>(out.info.model);
    auto& reg = out.model->params();

    const auto& params = j.at("params");
    if (params.size() != reg.size())
        throw std::runtime_error("checkpoint: manifest lists " +
                                 std::to_string(params.size()) +
                                 " parameters, model has " +
                                 std::to_string(reg.size()));
    for (size_t i = 0; i < reg.size(); ++i) {
        const auto& pj = params[i];
        if (pj.at("name").get<std::string>() != reg[i]->name)
            throw std::runtime_error("checkpoint: parameter order mismatch at " +
                                     reg[i]->name);
        if (pj.at("shape").get<std::vector<int>>() != reg[i]->shape)
            throw std::runtime_error("checkpoint: shape mismatch for " +
                                     reg[i]->name);
        read_floats(dir / pj.at("file").get<std::string>(), reg[i]->value);
    }

    if (j.contains("optimizer")) {
        out.has_optimizer = true;
        out.opt.step = j.at("optimizer").at("step").get<int64_t>();
        out.opt.match(reg);
        for (size_t i = 0; i < reg.size(); ++i) {
            read_floats(dir / "opt_m" / (reg[i]->name + ".bin"), out.opt.m[i]);
            read_floats(dir / "opt_v" / (reg[i]->name + ".bin"), out.opt.v[i]);
        }
    }
    return out;
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& dir) {
    json j = load_manifest(dir);
    CheckpointInfo info;
    info.model = config_from_json(j.at("model"));
    info.T = j.at("schedule").at("T").get<int>();
    info.beta_start = j.at("schedule").at("beta_start").get<double>();
    info.beta_end = j.at("schedule").at("beta_end").get<double>();
    info.step = j.at("step").get<int64_t>();
    info.seed = j.at("seed").get<uint64_t>();
    return info;
}

}  // namespace cpdm
