// wmforge: train an image preference model on synthetic frequency-domain
// artifacts, then use its gradients to extract, remove, and forge invisible
// watermarks against a built-in spread-spectrum reference watermarker.

#include "wmforge/attack.hpp"
#include "wmforge/checkpoint.hpp"
#include "wmforge/dataset.hpp"
#include "wmforge/evalkit.hpp"
#include "wmforge/imageio.hpp"
#include "wmforge/prefnet.hpp"
#include "wmforge/refwm.hpp"
#include "wmforge/spectra.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wmforge;

namespace {

// Exit codes, one per error class. 0 is success.
enum ExitCode : int {
    kUsage = 2,      // bad command line
    kIo = 3,         // missing or unreadable/unwritable paths
    kBadMessage = 4, // malformed message hex
    kBadConfig = 5,  // config file violates the schema
    kBadCkpt = 6,    // unreadable or mismatched checkpoint
    kNumeric = 7,    // optimization diverged or produced non-finite values
};

struct CliError {
    int code;
    std::string msg;
};

[[noreturn]] void fail(int code, const std::string& msg) { throw CliError{code, msg}; }

Image load_image(const std::string& path) {
    try {
        return read_image(path);
    } catch (const std::exception& e) {
        fail(kIo, std::string("cannot read image ") + path + ": " + e.what());
    }
}

Image load_rgb(const std::string& path) {
    Image img = load_image(path);
    if (img.c != 3) fail(kIo, path + ": expected a 3-channel image");
    return img;
}

PrefModel load_ckpt(const std::string& path) {
    try {
        return load_model(path);
    } catch (const std::exception& e) {
        fail(kBadCkpt, e.what());
    }
}

BitMessage parse_hex(const std::string& hex, int L) {
    try {
        return message_from_hex(hex, L);
    } catch (const std::exception& e) {
        fail(kBadMessage, e.what());
    }
}

void save_image(const std::string& path, const Image& img) {
    try {
        if (has_extension(path, ".ppm") || has_extension(path, ".pgm"))
            write_ppm(path, img);
        else
            write_png(path, img);
    } catch (const std::exception& e) {
        fail(kIo, std::string("cannot write ") + path + ": " + e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) fail(kIo, "cannot write " + path);
    os.write(text.data(), std::streamsize(text.size()));
    if (!os) fail(kIo, "failed writing " + path);
}

// Every command that produces files drops its fully-resolved parameters
// next to them, so a run can be reproduced from its outputs alone.
void snapshot_config(const json& cfg, const std::string& out_path, bool dir_output) {
    const fs::path p = dir_output ? fs::path(out_path) / "config.json"
                                  : fs::path(out_path + ".config.json");
    write_text(p.string(), cfg.dump(2) + "\n");
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(kIo, "cannot create directory " + dir);
}

std::vector<std::string> list_images(const std::string& dir) {
    if (!fs::is_directory(dir)) fail(kIo, dir + " is not a directory");
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string p = entry.path().string();
        if (has_extension(p, ".png") || has_extension(p, ".ppm") || has_extension(p, ".pgm"))
            names.push_back(p);
    }
    std::sort(names.begin(), names.end());
    if (names.empty()) fail(kIo, "no images found in " + dir);
    return names;
}

// json config file + CLI overrides; unknown keys are schema violations
json load_config_file(const std::string& path, const std::vector<std::string>& allowed) {
    std::ifstream is(path);
    if (!is) fail(kIo, "cannot read config " + path);
    json cfg;
    try {
        cfg = json::parse(is);
    } catch (const std::exception& e) {
        fail(kBadConfig, std::string("config parse error: ") + e.what());
    }
    if (!cfg.is_object()) fail(kBadConfig, "config root must be an object");
    for (const auto& [key, _] : cfg.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            fail(kBadConfig, "unknown config key: " + key);
    return cfg;
}

std::string fmt(double v, const char* spec = "%.6f") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

Image quantize_roundtrip(const Image& img) {
    return from_bytes(quantize8(img), img.h, img.w, img.c);
}

// residual container: magic, u32 h/w/c, raw little-endian f32
void write_residual(const std::string& path, const Image& w) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) fail(kIo, "cannot write " + path);
    os.write("WMRS", 4);
    auto put_u32 = [&](std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
        os.write(reinterpret_cast<const char*>(b), 4);
    };
    put_u32(std::uint32_t(w.h));
    put_u32(std::uint32_t(w.w));
    put_u32(std::uint32_t(w.c));
    for (float v : w.px) {
        std::uint32_t u;
        std::memcpy(&u, &v, 4);
        put_u32(u);
    }
    if (!os) fail(kIo, "failed writing " + path);
}

void write_visualization(const std::string& path, const Image& w, double alpha_vis) {
    const auto bytes = visualize_watermark(w, alpha_vis);
    try {
        write_png8(path, bytes, w.h, w.w, w.c);
    } catch (const std::exception& e) {
        fail(kIo, std::string("cannot write ") + path + ": " + e.what());
    }
}

// ---- subcommand payloads ----------------------------------------------

struct GenArtifactsArgs {
    std::string style = "all";
    int n = 16;
    int size = 128;
    std::uint64_t seed = 0;
    double alpha_vis = 20.0;
    std::string out;
};

int run_gen_artifacts(const GenArtifactsArgs& a) {
    if (a.style != "all" && a.style != "wave" && a.style != "noise" && a.style != "line")
        fail(kUsage, "unknown style " + a.style);
    ensure_dir(a.out);
    json manifest = json::array();
    for (int i = 0; i < a.n; ++i) {
        ArtifactStyle style;
        if (a.style == "all")
            style = ArtifactStyle(i % 3);
        else
            style = artifact_style_from(a.style);
        Rng rng({a.seed, 0x61727469ull, std::uint64_t(i)});
        const Spectrum spec = gen_artifact(style, a.size, a.size, rng);
        double residue = 0.0;
        const std::vector<float> plane = synthesize(spec, rng, &residue);

        Image res(a.size, a.size, 1);
        res.px = plane;
        char name[64];
        std::snprintf(name, sizeof(name), "artifact_%04d.png", i);
        const std::string art_path = (fs::path(a.out) / name).string();
        write_visualization(art_path, res, a.alpha_vis);

        double peak = 0.0;
        for (double v : spec.amp) peak = std::max(peak, v);
        Image spng(spec.h, spec.w, 1);
        for (std::size_t k = 0; k < spec.amp.size(); ++k)
            spng.px[k] = peak > 0.0 ? float(spec.amp[k] / peak) : 0.0f;
        std::snprintf(name, sizeof(name), "spectrum_%04d.png", i);
        const std::string spec_path = (fs::path(a.out) / name).string();
        save_image(spec_path, spng);

        json row;
        row["index"] = i;
        row["style"] = to_string(style);
        row["artifact"] = fs::path(art_path).filename().string();
        row["spectrum"] = fs::path(spec_path).filename().string();
        row["imag_residue"] = residue;
        manifest.push_back(row);
    }
    write_text((fs::path(a.out) / "manifest.json").string(), manifest.dump(2) + "\n");

    json cfg{{"command", "gen-artifacts"}, {"style", a.style},         {"n", a.n},
             {"size", a.size},             {"seed", a.seed},           {"alpha_vis", a.alpha_vis},
             {"out", a.out}};
    snapshot_config(cfg, a.out, true);
    std::cout << "wrote " << a.n << " artifacts to " << a.out << "\n";
    return 0;
}

struct GenDataArgs {
    int n = 240;
    int size = 128;
    std::uint64_t seed = 7;
    std::string out;
};

int run_gen_data(const GenDataArgs& a) {
    ensure_dir(a.out);
    for (int i = 0; i < a.n; ++i) {
        const Image img = gen_clean(a.seed, std::uint64_t(i), a.size);
        char name[64];
        std::snprintf(name, sizeof(name), "clean_%04d.png", i);
        save_image((fs::path(a.out) / name).string(), img);
    }
    json cfg{{"command", "gen-data"}, {"n", a.n}, {"size", a.size}, {"seed", a.seed}, {"out", a.out}};
    snapshot_config(cfg, a.out, true);
    std::cout << "wrote " << a.n << " clean images to " << a.out << "\n";
    return 0;
}

struct TrainArgs {
    std::string data;
    std::string config_file;
    std::string out;
    // sentinel values mean "not set on the command line"
    double lr = -1.0;
    int steps = -1;
    int batch = -1;
    int crop = -1;
    int resize = -1;
    int adv_period = -1;
    int adv_steps = -1;
    int width = -1;
    int depth = -1;
    int log_every = -1;
    std::string loss;
    std::int64_t seed = -1;
};

int run_train(const TrainArgs& a) {
    TrainConfig cfg;
    static const std::vector<std::string> keys = {
        "steps",      "batch",     "lr",        "beta1",      "beta2",
        "eps",        "weight_decay", "crop",   "resize",     "adv_period",
        "adv_steps",  "adv_lr_lo", "adv_lr_hi", "loss",       "seed",
        "width",      "depth",     "log_every"};
    if (!a.config_file.empty()) {
        const json file_cfg = load_config_file(a.config_file, keys);
        try {
            if (file_cfg.contains("steps")) cfg.steps = file_cfg["steps"].get<int>();
            if (file_cfg.contains("batch")) cfg.batch = file_cfg["batch"].get<int>();
            if (file_cfg.contains("lr")) cfg.lr = file_cfg["lr"].get<double>();
            if (file_cfg.contains("beta1")) cfg.beta1 = file_cfg["beta1"].get<double>();
            if (file_cfg.contains("beta2")) cfg.beta2 = file_cfg["beta2"].get<double>();
            if (file_cfg.contains("eps")) cfg.eps = file_cfg["eps"].get<double>();
            if (file_cfg.contains("weight_decay")) cfg.weight_decay = file_cfg["weight_decay"].get<double>();
            if (file_cfg.contains("crop")) cfg.crop = file_cfg["crop"].get<int>();
            if (file_cfg.contains("resize")) cfg.resize = file_cfg["resize"].get<int>();
            if (file_cfg.contains("adv_period")) cfg.adv_period = file_cfg["adv_period"].get<int>();
            if (file_cfg.contains("adv_steps")) cfg.adv_steps = file_cfg["adv_steps"].get<int>();
            if (file_cfg.contains("adv_lr_lo")) cfg.adv_lr_lo = file_cfg["adv_lr_lo"].get<double>();
            if (file_cfg.contains("adv_lr_hi")) cfg.adv_lr_hi = file_cfg["adv_lr_hi"].get<double>();
            if (file_cfg.contains("loss")) cfg.loss = loss_kind_from(file_cfg["loss"].get<std::string>());
            if (file_cfg.contains("seed")) cfg.seed = file_cfg["seed"].get<std::uint64_t>();
            if (file_cfg.contains("width")) cfg.width = file_cfg["width"].get<int>();
            if (file_cfg.contains("depth")) cfg.depth = file_cfg["depth"].get<int>();
            if (file_cfg.contains("log_every")) cfg.log_every = file_cfg["log_every"].get<int>();
        } catch (const CliError&) {
            throw;
        } catch (const std::exception& e) {
            fail(kBadConfig, std::string("config value error: ") + e.what());
        }
    }
    if (a.lr >= 0.0) cfg.lr = a.lr;
    if (a.steps >= 0) cfg.steps = a.steps;
    if (a.batch >= 0) cfg.batch = a.batch;
    if (a.crop >= 0) cfg.crop = a.crop;
    if (a.resize >= 0) cfg.resize = a.resize;
    if (a.adv_period >= 0) cfg.adv_period = a.adv_period;
    if (a.adv_steps >= 0) cfg.adv_steps = a.adv_steps;
    if (a.width >= 0) cfg.width = a.width;
    if (a.depth >= 0) cfg.depth = a.depth;
    if (a.log_every >= 0) cfg.log_every = a.log_every;
    if (!a.loss.empty()) {
        try {
            cfg.loss = loss_kind_from(a.loss);
        } catch (const std::exception& e) {
            fail(kUsage, e.what());
        }
    }
    if (a.seed >= 0) cfg.seed = std::uint64_t(a.seed);
    if (cfg.steps < 1 || cfg.batch < 1 || cfg.crop < 1 || cfg.resize < cfg.crop)
        fail(kBadConfig, "invalid training configuration");

    const auto names = list_images(a.data);
    std::vector<Image> dataset;
    dataset.reserve(names.size());
    for (const auto& n : names) dataset.push_back(load_rgb(n));
    std::cout << "training on " << dataset.size() << " images\n";

    TrainResult result;
    try {
        result = train(dataset, cfg, [](const TraceRow& r) {
            std::cout << "step " << r.step << " loss " << fmt(r.loss, "%.4f") << " rank_acc "
                      << fmt(r.rank_acc, "%.3f") << "\n";
        });
    } catch (const std::exception& e) {
        fail(kNumeric, e.what());
    }
    try {
        save_model(result.model, a.out);
    } catch (const std::exception& e) {
        fail(kIo, e.what());
    }
    const std::string stem = a.out + ".trace.csv";
    write_trace_csv(result.trace, stem);

    json resolved_cfg{{"command", "train"},
                      {"data", a.data},
                      {"out", a.out},
                      {"steps", cfg.steps},
                      {"batch", cfg.batch},
                      {"lr", cfg.lr},
                      {"beta1", cfg.beta1},
                      {"beta2", cfg.beta2},
                      {"eps", cfg.eps},
                      {"weight_decay", cfg.weight_decay},
                      {"crop", cfg.crop},
                      {"resize", cfg.resize},
                      {"adv_period", cfg.adv_period},
                      {"adv_steps", cfg.adv_steps},
                      {"adv_lr_lo", cfg.adv_lr_lo},
                      {"adv_lr_hi", cfg.adv_lr_hi},
                      {"loss", to_string(cfg.loss)},
                      {"seed", cfg.seed},
                      {"width", cfg.width},
                      {"depth", cfg.depth},
                      {"log_every", cfg.log_every}};
    snapshot_config(resolved_cfg, a.out, false);
    std::cout << "checkpoint written to " << a.out << "\n";
    return 0;
}

struct KeyArgs {
    std::uint64_t key_seed = 0;
    int bits = 32;
    int grid = 128;
    double alpha = 0.02;
    bool content_aware = false;
};

WatermarkKey build_key(const KeyArgs& a) {
    try {
        return make_key(a.key_seed, a.bits, a.grid, a.alpha, a.content_aware);
    } catch (const std::exception& e) {
        fail(kBadConfig, e.what());
    }
}

json key_json(const KeyArgs& a) {
    return json{{"key_seed", a.key_seed},
                {"bits", a.bits},
                {"grid", a.grid},
                {"alpha", a.alpha},
                {"content_aware", a.content_aware}};
}

struct EmbedArgs {
    KeyArgs key;
    std::string msg;
    std::string in;
    std::string out;
};

int run_embed(const EmbedArgs& a) {
    const WatermarkKey key = build_key(a.key);
    const BitMessage m = parse_hex(a.msg, key.L);
    const Image x = load_rgb(a.in);
    const Image xw = embed(x, m, key);
    save_image(a.out, xw);
    json cfg = key_json(a.key);
    cfg["command"] = "embed";
    cfg["msg"] = a.msg;
    cfg["in"] = a.in;
    cfg["out"] = a.out;
    snapshot_config(cfg, a.out, false);
    std::cout << "embedded " << key.L << " bits, psnr " << fmt(psnr(xw, x), "%.2f") << " dB\n";
    return 0;
}

struct DecodeArgs {
    KeyArgs key;
    std::string in;
    std::string truth;
};

int run_decode(const DecodeArgs& a) {
    const WatermarkKey key = build_key(a.key);
    const Image x = load_rgb(a.in);
    const DecodeResult r = decode(x, key);
    std::cout << "message " << message_to_hex(r.bits) << "\n";
    for (int b = 0; b < key.L; ++b)
        std::cout << "bit " << b << " corr " << fmt(r.correlations[std::size_t(b)], "%+.6e")
                  << " -> " << int(r.bits.bits[std::size_t(b)]) << "\n";
    if (!a.truth.empty()) {
        const BitMessage t = parse_hex(a.truth, key.L);
        int match = 0;
        for (int b = 0; b < key.L; ++b)
            if (r.bits.bits[std::size_t(b)] == t.bits[std::size_t(b)]) ++match;
        std::cout << "match " << match << "/" << key.L << " accuracy "
                  << fmt(double(match) / key.L, "%.4f") << "\n";
    }
    return 0;
}

struct AttackArgs {
    std::string ckpt;
    std::string in;
    std::string src;
    std::string target;
    std::string out;
    int steps = 500;
    double lr = 0.05;
    int working = 768;
    double alpha_vis = 20.0;
};

AttackConfig attack_config(const AttackArgs& a) {
    AttackConfig cfg;
    cfg.k = a.steps;
    cfg.lr = a.lr;
    cfg.working = a.working;
    if (cfg.k < 1) fail(kUsage, "--steps must be at least 1");
    if (cfg.lr <= 0.0) fail(kUsage, "--lr must be positive");
    return cfg;
}

int run_extract_wm(const AttackArgs& a) {
    const PrefModel model = load_ckpt(a.ckpt);
    const Image xw = load_rgb(a.in);
    const AttackConfig cfg = attack_config(a);
    Image w;
    try {
        w = extract_multires(model, xw, cfg);
    } catch (const std::exception& e) {
        fail(kNumeric, e.what());
    }
    write_residual(a.out, w);
    write_visualization(a.out + ".png", w, a.alpha_vis);
    json snap{{"command", "extract-wm"}, {"ckpt", a.ckpt},       {"in", a.in},
              {"out", a.out},            {"steps", a.steps},     {"lr", a.lr},
              {"working", a.working},    {"alpha_vis", a.alpha_vis}};
    snapshot_config(snap, a.out, false);
    double l2 = 0.0;
    for (float v : w.px) l2 += double(v) * v;
    std::cout << "residual l2 " << fmt(std::sqrt(l2), "%.6f") << " written to " << a.out << "\n";
    return 0;
}

int run_remove(const AttackArgs& a) {
    const PrefModel model = load_ckpt(a.ckpt);
    const Image xw = load_rgb(a.in);
    const AttackConfig cfg = attack_config(a);
    Image xhat;
    try {
        xhat = remove_watermark(model, xw, cfg);
    } catch (const std::exception& e) {
        fail(kNumeric, e.what());
    }
    save_image(a.out, xhat);
    json snap{{"command", "remove"}, {"ckpt", a.ckpt}, {"in", a.in},
              {"out", a.out},        {"steps", a.steps}, {"lr", a.lr},
              {"working", a.working}};
    snapshot_config(snap, a.out, false);
    std::cout << "cleaned image written to " << a.out << " (psnr vs input "
              << fmt(psnr(xhat, xw), "%.2f") << " dB)\n";
    return 0;
}

int run_forge(const AttackArgs& a) {
    const PrefModel model = load_ckpt(a.ckpt);
    const Image xw = load_rgb(a.src);
    const Image y = load_rgb(a.target);
    const AttackConfig cfg = attack_config(a);
    Image yw;
    try {
        yw = forge(model, xw, y, cfg);
    } catch (const std::exception& e) {
        fail(kNumeric, e.what());
    }
    save_image(a.out, yw);
    json snap{{"command", "forge"}, {"ckpt", a.ckpt},   {"src", a.src},
              {"target", a.target}, {"out", a.out},     {"steps", a.steps},
              {"lr", a.lr},         {"working", a.working}};
    snapshot_config(snap, a.out, false);
    std::cout << "forged image written to " << a.out << " (psnr vs target "
              << fmt(psnr(yw, y), "%.2f") << " dB)\n";
    return 0;
}

struct EvalArgs {
    std::string mode;
    std::string ckpt;
    std::string clean;
    std::string out;
    std::string msg;
    KeyArgs key;
    int steps = 500;
    double lr = 0.05;
    int working = 128;
    int n_targets = 50;
    int n_avg = 100;
    bool quantize = false;
    std::vector<std::string> baselines;
};

int run_eval(const EvalArgs& a) {
    if (a.mode != "remove" && a.mode != "forge") fail(kUsage, "--mode must be remove or forge");
    for (const auto& b : a.baselines)
        if (b != "average" && b != "gray" && b != "noise")
            fail(kUsage, "unknown baseline " + b);
    const PrefModel model = load_ckpt(a.ckpt);
    const WatermarkKey key = build_key(a.key);
    BitMessage msg;
    if (a.msg.empty()) {
        Rng mrng({a.key.key_seed, 0x6d736742ull});
        msg = random_message(mrng, key.L);
    } else {
        msg = parse_hex(a.msg, key.L);
    }
    AttackConfig cfg;
    cfg.k = a.steps;
    cfg.lr = a.lr;
    cfg.working = a.working;

    const auto names = list_images(a.clean);
    std::vector<Image> clean;
    clean.reserve(names.size());
    for (const auto& n : names) clean.push_back(load_rgb(n));

    auto maybe_quantize = [&](const Image& img) { return a.quantize ? quantize_roundtrip(img) : img; };

    json report;
    report["mode"] = a.mode;
    report["bits"] = key.L;
    report["message"] = message_to_hex(msg);
    json per_image = json::array();
    std::vector<int> match_counts;
    double acc_sum = 0.0, psnr_sum = 0.0;
    int rows = 0;

    if (a.mode == "forge") {
        if (int(clean.size()) < 1 + a.n_targets)
            fail(kIo, "need at least " + std::to_string(1 + a.n_targets) + " clean images");
        const Image xw = embed(clean[0], msg, key);
        Image w_hat;
        try {
            w_hat = extract_multires(model, xw, cfg);
        } catch (const std::exception& e) {
            fail(kNumeric, e.what());
        }
        for (int i = 0; i < a.n_targets; ++i) {
            const Image& y = clean[std::size_t(1 + i)];
            Image yw(y.h, y.w, y.c);
            Image w = (w_hat.h == y.h && w_hat.w == y.w) ? w_hat
                                                         : resize_bilinear(w_hat, y.h, y.w);
            for (std::size_t k = 0; k < yw.px.size(); ++k)
                yw.px[k] = std::clamp(y.px[k] + w.px[k], 0.0f, 1.0f);
            yw = maybe_quantize(yw);
            const DecodeResult d = decode(yw, key);
            int match = 0;
            for (int b = 0; b < key.L; ++b)
                if (d.bits.bits[std::size_t(b)] == msg.bits[std::size_t(b)]) ++match;
            const double acc = double(match) / key.L;
            const double p = psnr(yw, y);
            json row{{"name", fs::path(names[std::size_t(1 + i)]).filename().string()},
                     {"match_count", match},
                     {"bit_accuracy", acc},
                     {"psnr", p}};
            per_image.push_back(row);
            match_counts.push_back(match);
            acc_sum += acc;
            psnr_sum += p;
            ++rows;
        }
        report["source"] = fs::path(names[0]).filename().string();
    } else {
        const int n = std::min<int>(a.n_targets, int(clean.size()));
        for (int i = 0; i < n; ++i) {
            const Image& x = clean[std::size_t(i)];
            const Image xw = embed(x, msg, key);
            Image xhat;
            try {
                xhat = remove_watermark(model, xw, cfg);
            } catch (const std::exception& e) {
                fail(kNumeric, e.what());
            }
            xhat = maybe_quantize(xhat);
            const DecodeResult d = decode(xhat, key);
            int match = 0;
            for (int b = 0; b < key.L; ++b)
                if (d.bits.bits[std::size_t(b)] == msg.bits[std::size_t(b)]) ++match;
            const double acc = double(match) / key.L;
            const double p = psnr(xhat, x);
            json row{{"name", fs::path(names[std::size_t(i)]).filename().string()},
                     {"match_count", match},
                     {"bit_accuracy", acc},
                     {"psnr", p}};
            per_image.push_back(row);
            match_counts.push_back(match);
            acc_sum += acc;
            psnr_sum += p;
            ++rows;
        }
    }
    report["per_image"] = per_image;
    report["mean_bit_accuracy"] = rows ? acc_sum / rows : 0.0;
    report["mean_psnr"] = rows ? psnr_sum / rows : 0.0;

    // API-access baselines forge without the model
    if (!a.baselines.empty() && a.mode == "forge") {
        json baselines;
        for (const auto& bname : a.baselines) {
            Image w_base;
            if (bname == "average") {
                const int n = std::min<int>(a.n_avg, int(clean.size()));
                std::vector<Image> wm, cl;
                for (int i = 0; i < n; ++i) {
                    cl.push_back(clean[std::size_t(i)]);
                    wm.push_back(embed(clean[std::size_t(i)], msg, key));
                }
                w_base = baseline_average(wm, cl);
            } else if (bname == "gray") {
                w_base = baseline_gray(key, msg);
            }
            double bacc = 0.0;
            int cnt = 0;
            for (int i = 0; i < a.n_targets; ++i) {
                const Image& y = clean[std::size_t(1 + i)];
                Image yw;
                if (bname == "noise") {
                    Rng zr({a.key.key_seed, 0x6e6f6973ull, std::uint64_t(i)});
                    yw = baseline_noise_forge(y, key, msg, 0.1, zr);
                } else {
                    Image w = (w_base.h == y.h && w_base.w == y.w)
                                  ? w_base
                                  : resize_bilinear(w_base, y.h, y.w);
                    yw = Image(y.h, y.w, y.c);
                    for (std::size_t k = 0; k < yw.px.size(); ++k)
                        yw.px[k] = std::clamp(y.px[k] + w.px[k], 0.0f, 1.0f);
                }
                yw = maybe_quantize(yw);
                const DecodeResult d = decode(yw, key);
                int match = 0;
                for (int b = 0; b < key.L; ++b)
                    if (d.bits.bits[std::size_t(b)] == msg.bits[std::size_t(b)]) ++match;
                bacc += double(match) / key.L;
                ++cnt;
            }
            baselines[bname] = json{{"mean_bit_accuracy", cnt ? bacc / cnt : 0.0}};
        }
        report["baselines"] = baselines;
    }

    json snap = key_json(a.key);
    snap["command"] = "eval";
    snap["mode"] = a.mode;
    snap["ckpt"] = a.ckpt;
    snap["clean"] = a.clean;
    snap["out"] = a.out;
    snap["msg"] = message_to_hex(msg);
    snap["steps"] = a.steps;
    snap["lr"] = a.lr;
    snap["working"] = a.working;
    snap["n_targets"] = a.n_targets;
    snap["n_avg"] = a.n_avg;
    snap["quantize"] = a.quantize;
    snap["baselines"] = a.baselines;
    report["config"] = snap;

    write_text(a.out, report.dump(2) + "\n");
    snapshot_config(snap, a.out, false);
    std::cout << a.mode << " eval: mean bit accuracy "
              << fmt(report["mean_bit_accuracy"].get<double>(), "%.4f") << ", mean psnr "
              << fmt(report["mean_psnr"].get<double>(), "%.2f") << " dB -> " << a.out << "\n";
    return 0;
}

struct RocArgs {
    std::string report;
    std::string out;
};

int run_roc(const RocArgs& a) {
    std::ifstream is(a.report);
    if (!is) fail(kIo, "cannot read report " + a.report);
    json report;
    try {
        report = json::parse(is);
    } catch (const std::exception& e) {
        fail(kBadConfig, std::string("report parse error: ") + e.what());
    }
    if (!report.contains("bits") || !report.contains("per_image"))
        fail(kBadConfig, "report lacks bits/per_image fields");
    const int L = report["bits"].get<int>();
    std::vector<int> counts;
    for (const auto& row : report["per_image"]) counts.push_back(row["match_count"].get<int>());
    std::vector<RocPoint> roc;
    try {
        roc = detection_roc(counts, L);
    } catch (const std::exception& e) {
        fail(kBadConfig, e.what());
    }
    std::string csv = "tau,fpr,tpr\n";
    for (const auto& p : roc) {
        char line[96];
        std::snprintf(line, sizeof(line), "%d,%.17g,%.17g\n", p.tau, p.fpr, p.tpr);
        csv += line;
    }
    write_text(a.out, csv);
    json snap{{"command", "roc"}, {"report", a.report}, {"out", a.out}};
    snapshot_config(snap, a.out, false);
    std::cout << "roc with " << roc.size() << " thresholds -> " << a.out << "\n";
    return 0;
}

void add_key_flags(CLI::App* cmd, KeyArgs& key) {
    cmd->add_option("--key-seed", key.key_seed, "watermark key seed")->required();
    cmd->add_option("--bits", key.bits, "message length");
    cmd->add_option("--grid", key.grid, "key grid size");
    cmd->add_option("--alpha", key.alpha, "embedding strength");
    cmd->add_flag("--content-aware", key.content_aware, "modulate the watermark by the JND map");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"watermark forging toolkit"};
    app.require_subcommand(1);

    GenArtifactsArgs ga;
    auto* c_ga = app.add_subcommand("gen-artifacts", "emit synthetic artifact planes and spectra");
    c_ga->add_option("--style", ga.style, "wave|noise|line|all");
    c_ga->add_option("--n", ga.n, "number of artifacts");
    c_ga->add_option("--size", ga.size, "grid size");
    c_ga->add_option("--seed", ga.seed, "rng seed");
    c_ga->add_option("--alpha-vis", ga.alpha_vis, "visualization gain");
    c_ga->add_option("--out", ga.out, "output directory")->required();

    GenDataArgs gd;
    auto* c_gd = app.add_subcommand("gen-data", "emit synthetic clean images");
    c_gd->add_option("--n", gd.n, "number of images");
    c_gd->add_option("--size", gd.size, "image size");
    c_gd->add_option("--seed", gd.seed, "rng seed");
    c_gd->add_option("--out", gd.out, "output directory")->required();

    TrainArgs tr;
    auto* c_tr = app.add_subcommand("train", "train the preference model");
    c_tr->add_option("--data", tr.data, "directory of clean images")->required();
    c_tr->add_option("--config", tr.config_file, "json training config");
    c_tr->add_option("--out", tr.out, "checkpoint path")->required();
    c_tr->add_option("--steps", tr.steps, "training steps");
    c_tr->add_option("--batch", tr.batch, "batch size");
    c_tr->add_option("--lr", tr.lr, "learning rate");
    c_tr->add_option("--crop", tr.crop, "crop size");
    c_tr->add_option("--resize", tr.resize, "resize size");
    c_tr->add_option("--adv-period", tr.adv_period, "adversarial batch period");
    c_tr->add_option("--adv-steps", tr.adv_steps, "adversarial inner steps");
    c_tr->add_option("--loss", tr.loss, "ranking|bce|hinge");
    c_tr->add_option("--seed", tr.seed, "training seed");
    c_tr->add_option("--width", tr.width, "model width");
    c_tr->add_option("--depth", tr.depth, "model depth");
    c_tr->add_option("--log-every", tr.log_every, "trace interval");

    EmbedArgs em;
    auto* c_em = app.add_subcommand("embed", "embed a reference watermark");
    add_key_flags(c_em, em.key);
    c_em->add_option("--msg", em.msg, "message hex")->required();
    c_em->add_option("--in", em.in, "input image")->required();
    c_em->add_option("--out", em.out, "output image")->required();

    DecodeArgs de;
    auto* c_de = app.add_subcommand("decode", "decode a reference watermark");
    add_key_flags(c_de, de.key);
    c_de->add_option("--in", de.in, "input image")->required();
    c_de->add_option("--truth", de.truth, "expected message hex");

    AttackArgs ex;
    auto* c_ex = app.add_subcommand("extract-wm", "estimate the watermark residual");
    c_ex->add_option("--ckpt", ex.ckpt, "model checkpoint")->required();
    c_ex->add_option("--in", ex.in, "watermarked image")->required();
    c_ex->add_option("--steps", ex.steps, "ascent steps");
    c_ex->add_option("--lr", ex.lr, "ascent learning rate");
    c_ex->add_option("--working", ex.working, "working resolution");
    c_ex->add_option("--alpha-vis", ex.alpha_vis, "visualization gain");
    c_ex->add_option("--out", ex.out, "residual output path")->required();

    AttackArgs rm;
    auto* c_rm = app.add_subcommand("remove", "strip the watermark from an image");
    c_rm->add_option("--ckpt", rm.ckpt, "model checkpoint")->required();
    c_rm->add_option("--in", rm.in, "watermarked image")->required();
    c_rm->add_option("--steps", rm.steps, "ascent steps");
    c_rm->add_option("--lr", rm.lr, "ascent learning rate");
    c_rm->add_option("--working", rm.working, "working resolution");
    c_rm->add_option("--out", rm.out, "output image")->required();

    AttackArgs fg;
    auto* c_fg = app.add_subcommand("forge", "transplant a watermark onto a new image");
    c_fg->add_option("--ckpt", fg.ckpt, "model checkpoint")->required();
    c_fg->add_option("--src", fg.src, "watermarked source image")->required();
    c_fg->add_option("--target", fg.target, "target image")->required();
    c_fg->add_option("--steps", fg.steps, "ascent steps");
    c_fg->add_option("--lr", fg.lr, "ascent learning rate");
    c_fg->add_option("--working", fg.working, "working resolution");
    c_fg->add_option("--out", fg.out, "output image")->required();

    EvalArgs ev;
    auto* c_ev = app.add_subcommand("eval", "end-to-end attack evaluation report");
    c_ev->add_option("--mode", ev.mode, "remove|forge")->required();
    c_ev->add_option("--ckpt", ev.ckpt, "model checkpoint")->required();
    add_key_flags(c_ev, ev.key);
    c_ev->add_option("--clean", ev.clean, "directory of clean images")->required();
    c_ev->add_option("--out", ev.out, "report path")->required();
    c_ev->add_option("--msg", ev.msg, "message hex (random from key seed when absent)");
    c_ev->add_option("--steps", ev.steps, "ascent steps");
    c_ev->add_option("--lr", ev.lr, "ascent learning rate");
    c_ev->add_option("--working", ev.working, "working resolution");
    c_ev->add_option("--n-targets", ev.n_targets, "images to attack");
    c_ev->add_option("--n-avg", ev.n_avg, "averaging baseline sample count");
    c_ev->add_flag("--quantize", ev.quantize, "measure after 8-bit quantization");
    c_ev->add_option("--baseline", ev.baselines, "average|gray|noise (repeatable)");

    RocArgs rc;
    auto* c_rc = app.add_subcommand("roc", "detection ROC from an eval report");
    c_rc->add_option("--report", rc.report, "eval report json")->required();
    c_rc->add_option("--out", rc.out, "csv output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*c_ga) return run_gen_artifacts(ga);
        if (*c_gd) return run_gen_data(gd);
        if (*c_tr) return run_train(tr);
        if (*c_em) return run_embed(em);
        if (*c_de) return run_decode(de);
        if (*c_ex) return run_extract_wm(ex);
        if (*c_rm) return run_remove(rm);
        if (*c_fg) return run_forge(fg);
        if (*c_ev) return run_eval(ev);
        if (*c_rc) return run_roc(rc);
    } catch (const CliError& e) {
        std::cerr << "error: " << e.msg << "\n";
        return e.code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kUsage;
}
