#include "semidec/commands.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "semidec/synthetic_faces.h"

namespace semidec {
namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::io, "cannot write '" + path.string() + "'");
    out << text;
    require(static_cast<bool>(out), ErrorCode::io, "write failed for '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::io, "cannot read '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec && fs::is_directory(dir), ErrorCode::io, "cannot create directory '" + dir.string() + "'");
}

std::vector<fs::path> sdtf_files(const fs::path& dir) {
    require(fs::is_directory(dir), ErrorCode::io, "'" + dir.string() + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".sdtf") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const RunConfig& cfg, DenoiserParams& params) {
    ensure_dir(dir);
    const std::string digest = cfg.digest();
    TensorFile file;
    file.set_tag("config_digest", digest);
    file.set_tag("adapter_kind", std::string(to_string(params.kind())));
    for (const auto& np : params.params("")) file.add(matrix_to_tensor(np.name, *np.value));
    write_tensor_file(dir / "params.sdtf", file);
    write_text(dir / "config.ini", cfg.to_ini());

    std::ostringstream manifest;
    manifest << "config_digest = " << digest << "\n"
             << "adapter_kind = " << to_string(cfg.model.kind) << "\n"
             << "channels = " << cfg.model.channels << "\n"
             << "attn_dim = " << cfg.model.attn_dim << "\n"
             << "heads = " << cfg.model.heads << "\n"
             << "audio_dim = " << cfg.model.audio_dim << "\n"
             << "blocks = " << cfg.model.blocks << "\n"
             << "kernel = " << cfg.model.kernel << "\n"
             << "context_radius = " << cfg.context_radius << "\n"
             << "schedule = linear T=" << cfg.timesteps << " beta=" << cfg.beta_start << ".." << cfg.beta_end << "\n"
             << "seed = " << cfg.seed << "\n"
             << "parameters = " << parameter_count(params) << "\n";
    write_text(dir / "manifest.txt", manifest.str());
}

Checkpoint load_checkpoint(const fs::path& dir) {
    require(fs::is_directory(dir), ErrorCode::io, "missing checkpoint directory '" + dir.string() + "'");
    Checkpoint ck{parse_run_config(read_text(dir / "config.ini"), false), {}};
    const TensorFile file = read_tensor_file(dir / "params.sdtf");
    require(file.tag("config_digest") == ck.config.digest(), ErrorCode::config,
            "checkpoint parameters were written under a different config digest");
    ck.params = DenoiserParams::init(ck.config.model, ck.config.seed);
    for (auto& np : ck.params.params("")) {
        const Tensor& t = file.get(np.name);
        require(t.dims.size() == 2 && t.dims[0] == np.value->rows() && t.dims[1] == np.value->cols(),
                ErrorCode::shape_mismatch, "checkpoint tensor '" + np.name + "' has unexpected dims");
        *np.value = tensor_to_matrix(t, np.value->rows(), np.value->cols());
    }
    return ck;
}

std::string cmd_make_data(int n, std::uint64_t seed, const fs::path& out_dir, const SceneCfg& scene,
                          std::ostream& log) {
    scene.validate();
    require(n >= 1, ErrorCode::invalid_argument, "n must be >= 1");
    ensure_dir(out_dir);
    const std::string scene_digest = fnv1a_hex(scene.digest_text());
    const auto samples = make_dataset(n, seed, scene);

    std::ostringstream manifest;
    manifest << "seed = " << seed << "\n"
             << "samples = " << n << "\n"
             << "scene = " << scene.digest_text() << "\n"
             << "config_digest = " << scene_digest << "\n"
             << "masks = masks.sdtf\n";
    for (int i = 0; i < n; ++i) {
        std::ostringstream name;
        name << "sample_" << std::setw(4) << std::setfill('0') << i << ".sdtf";
        TensorFile file = video_to_tensor_file(samples[static_cast<std::size_t>(i)]);
        file.set_tag("config_digest", scene_digest);
        write_tensor_file(out_dir / name.str(), file);
        manifest << "file = " << name.str() << "\n";
    }
    save_masks(make_default_masks(scene.size, scene.size), out_dir / "masks.sdtf");
    write_text(out_dir / "manifest.txt", manifest.str());
    const std::string digest = fnv1a_hex(manifest.str());
    log << "manifest_digest " << digest << "\n";
    return digest;
}

TrainSummary cmd_train(const RunConfig& cfg, std::ostream& log) {
    cfg.validate();
    FeaturizerCfg feat;
    require(cfg.model.audio_dim == feat.feature_dim(), ErrorCode::config,
            "model.audio_dim must equal the featurizer dimension " + std::to_string(feat.feature_dim()));
    require(cfg.model.latent_channels == 1, ErrorCode::config, "synthetic frames are single-channel");

    const fs::path out_dir = cfg.out_dir;
    ensure_dir(out_dir);
    const std::string digest = cfg.digest();

    const auto data = make_dataset(cfg.data_samples, cfg.data_seed, cfg.scene);
    const auto pool = to_train_examples(data, cfg.context_radius);
    const RegionMasks masks = make_default_masks(cfg.scene.size, cfg.scene.size);
    const NoiseSchedule schedule = cfg.schedule();
    DenoiserParams params = DenoiserParams::init(cfg.model, cfg.seed);

    std::ofstream csv(out_dir / "loss.csv", std::ios::trunc);
    require(static_cast<bool>(csv), ErrorCode::io, "cannot write loss log");
    csv << "# config_digest=" << digest << "\n" << "step,loss,loss_avg\n";
    double window_sum = 0.0;
    int window_n = 0;
    const auto losses = train(pool, masks, params, schedule, cfg.train, [&](int step, double loss) {
        window_sum += loss;
        ++window_n;
        if ((step + 1) % cfg.log_every == 0 || step + 1 == cfg.train.steps) {
            csv << step + 1 << ',' << std::setprecision(10) << loss << ',' << window_sum / window_n << '\n';
            log << "step " << step + 1 << " loss_avg " << window_sum / window_n << "\n";
            window_sum = 0.0;
            window_n = 0;
        }
    });

    TrainSummary summary{losses, digest, out_dir / "checkpoint"};
    save_checkpoint(summary.checkpoint_dir, cfg, params);
    log << "checkpoint " << summary.checkpoint_dir.string() << " config_digest " << digest << "\n";
    return summary;
}

TrainSummary cmd_train(const fs::path& config_path, std::ostream& log) {
    return cmd_train(load_run_config(config_path), log);
}

std::vector<double> energy_from_embedding(const AudioEmbedding& a, double energy_floor) {
    std::vector<double> e;
    for (Index t = 0; t < a.frames(); ++t) e.push_back(std::max(0.0, std::exp(a.tokens(t, 0)) - energy_floor));
    return e;
}

void write_pgm(const fs::path& path, const Latent& pixels) {
    require(pixels.channels() == 1, ErrorCode::invalid_argument, "PGM export needs a single-channel frame");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::io, "cannot write '" + path.string() + "'");
    out << "P5\n" << pixels.width << " " << pixels.height << "\n255\n";
    for (Index p = 0; p < pixels.pixels(); ++p) {
        const double v = std::clamp(pixels.data(0, p), 0.0, 1.0);
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
    require(static_cast<bool>(out), ErrorCode::io, "write failed for '" + path.string() + "'");
}

std::vector<Latent> cmd_sample(const SampleRequest& req, std::ostream& log) {
    const int sources = int(req.audio_seed.has_value()) + int(req.embedding.has_value()) + int(req.wav.has_value());
    require(sources == 1, ErrorCode::invalid_argument, "give exactly one of --audio-seed, --embedding, --wav");
    const Checkpoint ck = load_checkpoint(req.checkpoint);
    const RunConfig& cfg = ck.config;

    AudioEmbedding audio;
    std::vector<double> lip_energy;
    std::string source;
    if (req.audio_seed) {
        const VideoSample clip = gen_video_sample(*req.audio_seed, cfg.scene);
        audio = clip.audio;
        lip_energy = clip.drivers.lip_energy;
        source = "synthetic:" + std::to_string(*req.audio_seed);
    } else if (req.embedding) {
        audio = load_embedding(*req.embedding);
        source = "embedding:" + req.embedding->filename().string();
    } else {
        const AudioClip clip = read_wav(*req.wav, cfg.scene.frames_per_second);
        audio = embed_audio(clip, FeaturizerCfg::for_clip(clip));
        source = "wav:" + req.wav->filename().string();
    }
    require(audio.dim() == cfg.model.audio_dim, ErrorCode::shape_mismatch,
            "audio embedding dim " + std::to_string(audio.dim()) + " does not match model audio_dim " +
                std::to_string(cfg.model.audio_dim));
    if (audio.frames() > cfg.scene.frames) {
        audio.tokens = audio.tokens.topRows(cfg.scene.frames).eval();
    }

    const RegionMasks masks = make_default_masks(cfg.scene.size, cfg.scene.size);
    SampleCfg sc{cfg.sample_steps, cfg.context_radius, req.sample_seed.value_or(cfg.sample_seed)};
    const auto latents = sample(audio, masks, ck.params, cfg.schedule(), sc);

    VideoSample video;
    video.seed = sc.seed;
    for (const auto& z : latents) video.frames.push_back(latent_to_pixels(z));
    video.audio = audio;
    TensorFile file;
    const auto& f0 = video.frames.front();
    Tensor frames{"frames",
                  {static_cast<std::uint32_t>(video.frames.size()), 1, static_cast<std::uint32_t>(f0.height),
                   static_cast<std::uint32_t>(f0.width)},
                  DType::f64,
                  {}};
    for (const auto& f : video.frames) frames.values.insert(frames.values.end(), f.data.data(), f.data.data() + f.data.size());
    file.add(std::move(frames));
    file.add(matrix_to_tensor("audio", audio.tokens));
    if (!lip_energy.empty()) {
        file.add(Tensor{"lip_energy", {static_cast<std::uint32_t>(lip_energy.size())}, DType::f64, lip_energy});
    }
    file.set_tag("config_digest", cfg.digest());
    file.set_tag("adapter_kind", std::string(to_string(cfg.model.kind)));
    file.set_tag("source", source);
    file.set_tag("sample_seed", std::to_string(sc.seed));
    if (req.out.has_parent_path()) ensure_dir(req.out.parent_path());
    write_tensor_file(req.out, file);

    if (req.pgm_dir) {
        ensure_dir(*req.pgm_dir);
        for (std::size_t i = 0; i < video.frames.size(); ++i) {
            std::ostringstream name;
            name << "frame_" << std::setw(2) << std::setfill('0') << i << ".pgm";
            write_pgm(*req.pgm_dir / name.str(), video.frames[i]);
        }
    }
    log << "wrote " << req.out.string() << " frames " << video.frames.size() << " config_digest " << cfg.digest()
        << "\n";
    return video.frames;
}

std::vector<MetricsReport> cmd_eval(const fs::path& videos_dir, const std::string& masks_arg, const fs::path& out_csv,
                                    std::ostream& log) {
    std::vector<std::pair<fs::path, VideoSample>> videos;
    std::vector<std::string> kinds;
    std::string digest_input = "masks=" + masks_arg + "\n";
    for (const auto& path : sdtf_files(videos_dir)) {
        const TensorFile file = read_tensor_file(path);
        if (!file.contains("frames")) continue;
        VideoSample v = video_from_tensor_file(file);
        kinds.push_back(file.tag("adapter_kind").value_or("data"));
        digest_input += path.filename().string() + ":" + file.tag("config_digest").value_or("-") + "\n";
        videos.emplace_back(path, std::move(v));
    }
    require(!videos.empty(), ErrorCode::io, "no video tensor files in '" + videos_dir.string() + "'");

    const auto& f0 = videos.front().second.frames.front();
    const RegionMasks masks = masks_arg == "default" ? make_default_masks(f0.height, f0.width) : load_masks(masks_arg);
    const std::string digest = fnv1a_hex(digest_input);

    std::vector<MetricsReport> reports;
    for (std::size_t i = 0; i < videos.size(); ++i) {
        const auto& [path, v] = videos[i];
        std::vector<double> energy = v.audio.frames() > 0 ? energy_from_embedding(v.audio) : v.drivers.lip_energy;
        require(energy.size() == v.frames.size(), ErrorCode::shape_mismatch,
                path.filename().string() + ": no per-frame audio energy matching the frame count");
        MetricsReport r = evaluate_video(v.frames, masks, energy);
        r.id = path.stem().string();
        r.kind = kinds[i];
        if (r.sync_degenerate) log << "warning: " << r.id << ": zero-variance lip or energy series, sync set to 0\n";
        reports.push_back(std::move(r));
    }

    if (out_csv.has_parent_path()) ensure_dir(out_csv.parent_path());
    std::ofstream csv(out_csv, std::ios::trunc);
    require(static_cast<bool>(csv), ErrorCode::io, "cannot write '" + out_csv.string() + "'");
    csv << "# config_digest=" << digest << "\n" << kMetricsCsvHeader << "\n";
    for (const auto& r : reports) write_metrics_row(csv, r);
    log << "evaluated " << reports.size() << " videos config_digest " << digest << "\n";
    return reports;
}

CompareReport cmd_bench(const fs::path& config_path, const fs::path& out_json, std::ostream& log) {
    const RunConfig cfg = load_run_config(config_path);
    const CompareReport r = compare(AdapterKind::semi, AdapterKind::fully, cfg.bench);
    if (out_json.has_parent_path()) ensure_dir(out_json.parent_path());
    write_text(out_json, compare_json(r, cfg.digest()) + "\n");
    log << compare_table(r) << "config_digest " << cfg.digest() << "\n";
    return r;
}

FlopReport cmd_flops(const fs::path& config_path, std::ostream& out) {
    const RunConfig cfg = load_run_config(config_path);
    const FlopReport r = count_flops(cfg.flops);
    out << flops_table(r) << "config_digest " << cfg.digest() << "\n";
    return r;
}

}  // namespace semidec
