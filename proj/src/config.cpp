#include "semidec/config.h"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace semidec {
namespace {

struct Field {
    std::string key;  // section.name
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
    if constexpr (std::is_same_v<T, std::string>) {
        return text;
    } else if constexpr (std::is_same_v<T, bool>) {
        if (text == "true" || text == "1" || text == "yes") return true;
        if (text == "false" || text == "0" || text == "no") return false;
        fail(ErrorCode::config, key + ": expected a boolean, got '" + text + "'");
    } else if constexpr (std::is_same_v<T, AdapterKind>) {
        try {
            return parse_adapter_kind(text);
        } catch (const Error&) {
            fail(ErrorCode::config, key + ": expected 'semi' or 'fully', got '" + text + "'");
        }
    } else if constexpr (std::is_floating_point_v<T>) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        require(used == text.size() && !text.empty(), ErrorCode::config,
                key + ": expected a number, got '" + text + "'");
        return static_cast<T>(v);
    } else {
        T v{};
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        require(ec == std::errc{} && ptr == text.data() + text.size(), ErrorCode::config,
                key + ": expected an integer, got '" + text + "'");
        return v;
    }
}

template <typename T>
std::string format_value(const T& v) {
    if constexpr (std::is_same_v<T, std::string>) {
        return v;
    } else if constexpr (std::is_same_v<T, bool>) {
        return v ? "true" : "false";
    } else if constexpr (std::is_same_v<T, AdapterKind>) {
        return std::string(to_string(v));
    } else if constexpr (std::is_floating_point_v<T>) {
        std::ostringstream os;
        os << std::setprecision(17) << v;
        return os.str();
    } else {
        return std::to_string(v);
    }
}

template <typename Access>
Field field(std::string key, Access access) {
    using T = std::remove_reference_t<decltype(access(std::declval<RunConfig&>()))>;
    return Field{key,
                 [key, access](RunConfig& c, const std::string& text) { access(c) = parse_value<T>(key, text); },
                 [access](const RunConfig& c) { return format_value<T>(access(const_cast<RunConfig&>(c))); }};
}

#define SEMIDEC_FIELD(key, expr) field(key, [](RunConfig& c) -> auto& { return expr; })

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        SEMIDEC_FIELD("run.seed", c.seed),
        SEMIDEC_FIELD("run.out_dir", c.out_dir),
        SEMIDEC_FIELD("model.kind", c.model.kind),
        SEMIDEC_FIELD("model.channels", c.model.channels),
        SEMIDEC_FIELD("model.attn_dim", c.model.attn_dim),
        SEMIDEC_FIELD("model.heads", c.model.heads),
        SEMIDEC_FIELD("model.audio_dim", c.model.audio_dim),
        SEMIDEC_FIELD("model.blocks", c.model.blocks),
        SEMIDEC_FIELD("model.kernel", c.model.kernel),
        SEMIDEC_FIELD("model.time_dim", c.model.time_dim),
        SEMIDEC_FIELD("model.output_init_scale", c.model.output_init_scale),
        SEMIDEC_FIELD("model.context_radius", c.context_radius),
        SEMIDEC_FIELD("schedule.timesteps", c.timesteps),
        SEMIDEC_FIELD("schedule.beta_start", c.beta_start),
        SEMIDEC_FIELD("schedule.beta_end", c.beta_end),
        SEMIDEC_FIELD("train.learning_rate", c.train.learning_rate),
        SEMIDEC_FIELD("train.beta1", c.train.beta1),
        SEMIDEC_FIELD("train.beta2", c.train.beta2),
        SEMIDEC_FIELD("train.batch", c.train.batch),
        SEMIDEC_FIELD("train.steps", c.train.steps),
        SEMIDEC_FIELD("train.log_every", c.log_every),
        SEMIDEC_FIELD("data.samples", c.data_samples),
        SEMIDEC_FIELD("data.seed", c.data_seed),
        SEMIDEC_FIELD("data.holdout_samples", c.holdout_samples),
        SEMIDEC_FIELD("data.holdout_seed", c.holdout_seed),
        SEMIDEC_FIELD("scene.frames", c.scene.frames),
        SEMIDEC_FIELD("scene.size", c.scene.size),
        SEMIDEC_FIELD("scene.background_contrast", c.scene.background_contrast),
        SEMIDEC_FIELD("scene.lip_gain", c.scene.lip_gain),
        SEMIDEC_FIELD("scene.lip_min_height", c.scene.lip_min_height),
        SEMIDEC_FIELD("scene.exp_lambda", c.scene.exp_lambda),
        SEMIDEC_FIELD("scene.pose_amplitude", c.scene.pose_amplitude),
        SEMIDEC_FIELD("scene.pose_period", c.scene.pose_period),
        SEMIDEC_FIELD("scene.pause_probability", c.scene.pause_probability),
        SEMIDEC_FIELD("scene.audio_noise", c.scene.audio_noise),
        SEMIDEC_FIELD("sample.steps", c.sample_steps),
        SEMIDEC_FIELD("sample.seed", c.sample_seed),
        SEMIDEC_FIELD("bench.name", c.bench.name),
        SEMIDEC_FIELD("bench.channels", c.bench.channels),
        SEMIDEC_FIELD("bench.attn_dim", c.bench.attn_dim),
        SEMIDEC_FIELD("bench.audio_dim", c.bench.audio_dim),
        SEMIDEC_FIELD("bench.audio_tokens", c.bench.audio_tokens),
        SEMIDEC_FIELD("bench.size", c.bench.size),
        SEMIDEC_FIELD("bench.heads", c.bench.heads),
        SEMIDEC_FIELD("bench.blocks", c.bench.blocks),
        SEMIDEC_FIELD("bench.kernel", c.bench.kernel),
        SEMIDEC_FIELD("bench.runs", c.bench.runs),
        SEMIDEC_FIELD("bench.warmup", c.bench.warmup),
        SEMIDEC_FIELD("bench.single_thread", c.bench.single_thread),
        SEMIDEC_FIELD("bench.seed", c.bench.seed),
        SEMIDEC_FIELD("flops.channels", c.flops.channels),
        SEMIDEC_FIELD("flops.attn_dim", c.flops.attn_dim),
        SEMIDEC_FIELD("flops.audio_dim", c.flops.audio_dim),
        SEMIDEC_FIELD("flops.audio_tokens", c.flops.audio_tokens),
        SEMIDEC_FIELD("flops.height", c.flops.height),
        SEMIDEC_FIELD("flops.width", c.flops.width),
        SEMIDEC_FIELD("flops.heads", c.flops.heads),
        SEMIDEC_FIELD("flops.kernel", c.flops.kernel),
    };
    return table;
}

#undef SEMIDEC_FIELD

}  // namespace

void RunConfig::validate() const {
    model.validate();
    train.validate();
    scene.validate();
    bench.validate();
    flops.validate();
    make_schedule(timesteps, beta_start, beta_end);
    require(context_radius >= 0, ErrorCode::config, "model.context_radius must be >= 0");
    require(log_every >= 1, ErrorCode::config, "train.log_every must be >= 1");
    require(data_samples >= 1 && holdout_samples >= 1, ErrorCode::config, "dataset sizes must be >= 1");
    require(sample_steps >= 1 && sample_steps <= timesteps, ErrorCode::config,
            "sample.steps must lie in [1, schedule.timesteps]");
    require(train.seed == seed, ErrorCode::config, "train seed must follow run.seed");
}

std::string RunConfig::canonical_text() const {
    std::string out;
    for (const auto& f : fields()) out += f.key + "=" + f.get(*this) + "\n";
    return out;
}

std::string RunConfig::to_ini() const {
    std::string out;
    std::string current;
    for (const auto& f : fields()) {
        const auto dot = f.key.find('.');
        const std::string section = f.key.substr(0, dot);
        if (section != current) {
            out += (current.empty() ? "[" : "\n[") + section + "]\n";
            current = section;
        }
        out += f.key.substr(dot + 1) + " = " + f.get(*this) + "\n";
    }
    return out;
}

std::string RunConfig::digest() const { return fnv1a_hex(canonical_text()); }

RunConfig parse_run_config(std::string_view text, bool allow_env_seed) {
    // The ini parser only knows ';' comments; accept '#' as well.
    std::istringstream raw{std::string(text)};
    std::ostringstream cleaned;
    for (std::string line; std::getline(raw, line);) {
        const auto first = line.find_first_not_of(" \t");
        if (first != std::string::npos && line[first] == '#') continue;
        cleaned << line << "\n";
    }

    boost::property_tree::ptree tree;
    try {
        std::istringstream in(cleaned.str());
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        fail(ErrorCode::config, std::string("config parse error: ") + e.what());
    }

    RunConfig cfg;
    for (const auto& [section, body] : tree) {
        require(!body.empty() || body.data().empty(), ErrorCode::config,
                "key '" + section + "' must appear inside a [section]");
        for (const auto& [name, value] : body) {
            const std::string key = section + "." + name;
            const Field* f = nullptr;
            for (const auto& candidate : fields()) {
                if (candidate.key == key) f = &candidate;
            }
            require(f != nullptr, ErrorCode::config, "unknown config key '" + key + "'");
            f->set(cfg, value.data());
        }
    }
    if (allow_env_seed) {
        if (const char* env = std::getenv(kSeedEnvVar); env != nullptr && *env != '\0') {
            cfg.seed = parse_value<std::uint64_t>(kSeedEnvVar, env);
        }
    }
    cfg.train.seed = cfg.seed;
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path, bool allow_env_seed) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::io, "cannot read config '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_run_config(buffer.str(), allow_env_seed);
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

}  // namespace semidec
