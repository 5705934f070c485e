// clear: phantom/mask generation, training, reconstruction, evaluation and
// theorem verification behind one binary. Exit 0 on success, 1 on invalid
// input, 2 on runtime failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "clear/evaluation.hpp"
#include "clear/io.hpp"
#include "clear/metrics.hpp"
#include "clear/solver.hpp"
#include "clear/theory.hpp"
#include "clear/training.hpp"

namespace fs = std::filesystem;
using namespace clear;

namespace {

int usage(std::ostream& os) {
    os << "usage: clear <command> [--key value | --key=value]...\n"
          "\n"
          "commands:\n"
          "  phantom-gen   write synthetic test images\n"
          "  mask-gen      write a k-space sampling mask\n"
          "  train         train the regularizer (modes CLEAR, UNCLEAR, AR)\n"
          "  reconstruct   projected subgradient reconstruction of one image\n"
          "  evaluate      compare methods over a dataset, emit metrics CSV\n"
          "  verify        numerical checks: prop1, thm2, thm4, thm5, all\n"
          "\n"
          "config precedence: --config <file> < CLEAR_* environment < flags.\n"
          "`clear <command> --help` lists the command's keys and defaults.\n";
    return 1;
}

bool want_help(const std::vector<std::string>& args) {
    for (const std::string& a : args)
        if (a == "--help" || a == "-h") return true;
    return false;
}

int print_keys(const std::string& cmd, const io::RunConfig& cfg) {
    std::cout << "keys for `clear " << cmd << "` (with defaults):\n" << cfg.echo();
    return 0;
}

io::RunConfig base_config() {
    io::RunConfig cfg;
    cfg.declare("config", "");
    cfg.declare("out-dir", "out");
    cfg.declare("seed", "0");
    return cfg;
}

// file < environment < flags; the config file path itself may come from
// the --config flag or CLEAR_CONFIG.
void merge_sources(io::RunConfig& cfg, const std::vector<std::string>& args) {
    std::string config_path;
    if (const char* env = std::getenv("CLEAR_CONFIG")) config_path = env;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size())
            config_path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0)
            config_path = args[i].substr(9);
    }
    if (!config_path.empty()) {
        cfg.set("config", config_path);
        cfg.load_file(config_path);
    }
    cfg.load_env();
    const std::vector<std::string> extra = cfg.apply_flags(args);
    if (!extra.empty())
        throw std::invalid_argument("unexpected argument '" + extra.front() + "'");
}

fs::path prepare_out_dir(const io::RunConfig& cfg) {
    const std::string dir = cfg.get("out-dir");
    if (dir.empty()) throw std::invalid_argument("out-dir must not be empty");
    fs::create_directories(dir);
    io::write_text((fs::path(dir) / "config.txt").string(), cfg.echo());
    return dir;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t end = s.find(sep, start);
        if (end == std::string::npos) {
            parts.push_back(s.substr(start));
            break;
        }
        parts.push_back(s.substr(start, end - start));
        start = end + 1;
    }
    while (!parts.empty() && parts.back().empty()) parts.pop_back();
    return parts;
}

std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
    std::vector<int> out;
    for (const std::string& part : split(s, ',')) {
        std::size_t pos = 0;
        int v;
        try {
            v = std::stoi(part, &pos);
        } catch (const std::exception&) {
            throw std::invalid_argument(what + ": '" + part + "' is not an integer");
        }
        if (pos != part.size())
            throw std::invalid_argument(what + ": '" + part + "' is not an integer");
        out.push_back(v);
    }
    return out;
}

void declare_arch_keys(io::RunConfig& cfg) {
    cfg.declare("arch.family", "conv");
    cfg.declare("arch.channels", "2");
    cfg.declare("arch.height", "32");
    cfg.declare("arch.width", "32");
    cfg.declare("arch.widths", "8,8,16,16,32,32");
    cfg.declare("arch.three", "0,0,1,0,1,0");
    cfg.declare("arch.pool", "1,1,1,1,1,0");
    cfg.declare("arch.slope", "0.2");
    cfg.declare("mlp.dim", "2");
    cfg.declare("mlp.hidden", "32,32");
}

icnn::ArchDesc arch_from_config(const io::RunConfig& cfg) {
    icnn::ArchDesc desc;
    const std::string family = cfg.get("arch.family");
    if (family == "conv") {
        desc.family = icnn::ArchDesc::Family::Conv;
        desc.conv.channels = cfg.get_int("arch.channels");
        desc.conv.height = cfg.get_int("arch.height");
        desc.conv.width = cfg.get_int("arch.width");
        desc.conv.slope = cfg.get_double("arch.slope");
        const auto widths = parse_int_list(cfg.get("arch.widths"), "arch.widths");
        const auto three = parse_int_list(cfg.get("arch.three"), "arch.three");
        const auto pool = parse_int_list(cfg.get("arch.pool"), "arch.pool");
        if (widths.size() != 6 || three.size() != 6 || pool.size() != 6)
            throw std::invalid_argument("arch.widths/three/pool take exactly 6 entries");
        for (int i = 0; i < 6; ++i) {
            desc.conv.widths[i] = widths[i];
            desc.conv.three_conv[i] = three[i] != 0;
            desc.conv.pool[i] = pool[i] != 0;
        }
    } else if (family == "mlp") {
        desc.family = icnn::ArchDesc::Family::Mlp;
        desc.mlp.input_dim = cfg.get_int("mlp.dim");
        desc.mlp.hidden = parse_int_list(cfg.get("mlp.hidden"), "mlp.hidden");
        desc.mlp.slope = cfg.get_double("arch.slope");
    } else {
        throw std::invalid_argument("arch.family must be conv or mlp");
    }
    return desc;
}

void declare_pgd_keys(io::RunConfig& cfg) {
    cfg.declare("pgd.iters", "100");
    cfg.declare("pgd.schedule", "harmonic");
    cfg.declare("pgd.c", "0.1");
    cfg.declare("pgd.early_stop", "0");
}

solver::PGDConfig pgd_from_config(const io::RunConfig& cfg) {
    solver::PGDConfig pgd;
    pgd.max_iters = cfg.get_int("pgd.iters");
    pgd.schedule = solver::schedule_from_name(cfg.get("pgd.schedule"));
    pgd.c = cfg.get_double("pgd.c");
    pgd.early_stop = cfg.get_double("pgd.early_stop");
    if (pgd.max_iters < 1) throw std::invalid_argument("pgd.iters must be >= 1");
    if (!(pgd.c > 0.0)) throw std::invalid_argument("pgd.c must be > 0");
    return pgd;
}

std::vector<Tensor> load_images(const std::string& dir, const char* flag) {
    if (dir.empty())
        throw std::invalid_argument(std::string("a data directory is required (--") + flag + ")");
    if (!fs::is_directory(dir))
        throw std::invalid_argument(dir + " is not a directory");
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".img") paths.push_back(entry.path());
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw std::invalid_argument("no .img files in " + dir);
    std::vector<Tensor> images;
    images.reserve(paths.size());
    for (const fs::path& p : paths) images.push_back(io::read_image(p.string()));
    return images;
}

int cmd_phantom_gen(const std::vector<std::string>& args) {
    io::RunConfig cfg = base_config();
    cfg.declare("kind", "ellipses");
    cfg.declare("size", "32");
    cfg.declare("count", "1");
    cfg.declare("png", "0");
    if (want_help(args)) return print_keys("phantom-gen", cfg);
    merge_sources(cfg, args);

    const eval::PhantomKind kind = eval::phantom_kind_from_name(cfg.get("kind"));
    const int size = cfg.get_int("size");
    const int count = cfg.get_int("count");
    if (count < 1) throw std::invalid_argument("count must be >= 1");
    const std::uint64_t seed = cfg.get_u64("seed");
    const bool png = cfg.get_int("png") != 0;
    const fs::path dir = prepare_out_dir(cfg);

    for (int i = 0; i < count; ++i) {
        const Tensor img = eval::make_phantom(kind, size, seed + static_cast<std::uint64_t>(i));
        char name[32];
        std::snprintf(name, sizeof(name), "phantom_%03d", i);
        io::write_image((dir / (std::string(name) + ".img")).string(), img);
        if (png)
            io::write_png_gray((dir / (std::string(name) + ".png")).string(),
                               metrics::magnitude_image(img));
    }
    std::cout << "wrote " << count << " " << cfg.get("kind") << " phantom(s) to "
              << dir.string() << "\n";
    return 0;
}

int cmd_mask_gen(const std::vector<std::string>& args) {
    io::RunConfig cfg = base_config();
    cfg.declare("kind", "uniform-1d");
    cfg.declare("height", "32");
    cfg.declare("width", "32");
    cfg.declare("accel", "3");
    cfg.declare("acs", "0.08");
    cfg.declare("png", "0");
    if (want_help(args)) return print_keys("mask-gen", cfg);
    merge_sources(cfg, args);

    const fm::SamplingMask mask =
        fm::make_mask(fm::mask_kind_from_name(cfg.get("kind")), cfg.get_int("height"),
                      cfg.get_int("width"), cfg.get_double("accel"), cfg.get_double("acs"),
                      cfg.get_u64("seed"));
    const fs::path dir = prepare_out_dir(cfg);
    io::write_mask((dir / "mask.msk").string(), mask);
    if (cfg.get_int("png") != 0) {
        Tensor img({1, mask.height, mask.width});
        for (std::size_t i = 0; i < mask.keep.size(); ++i) img[i] = mask.keep[i];
        io::write_png_gray((dir / "mask.png").string(), img);
    }
    std::printf("wrote mask.msk: %zu/%d samples, x%.3f achieved\n", mask.kept_count(),
                mask.height * mask.width, mask.achieved_acceleration());
    return 0;
}

int cmd_train(const std::vector<std::string>& args) {
    io::RunConfig cfg = base_config();
    cfg.declare("data", "");
    cfg.declare("mode", "CLEAR");
    cfg.declare("epochs", "20");
    cfg.declare("batch", "8");
    cfg.declare("lr", "0.0001");
    declare_arch_keys(cfg);
    cfg.declare("train.latent_steps", "10");
    cfg.declare("train.eta", "0.05");
    cfg.declare("train.delta0", "0.3");
    cfg.declare("train.deltak", "0.01");
    cfg.declare("train.gp_weight", "10");
    cfg.declare("train.gp_eps", "0.001");
    if (want_help(args)) return print_keys("train", cfg);
    merge_sources(cfg, args);

    const std::vector<Tensor> dataset = load_images(cfg.get("data"), "data");
    train::TrainConfig tc;
    tc.arch = arch_from_config(cfg);
    tc.mode = train::mode_from_name(cfg.get("mode"));
    tc.epochs = cfg.get_int("epochs");
    tc.batch_size = cfg.get_int("batch");
    tc.lr = cfg.get_double("lr");
    tc.latent_steps = cfg.get_int("train.latent_steps");
    tc.latent_step_size = cfg.get_double("train.eta");
    tc.init_noise_std = cfg.get_double("train.delta0");
    tc.walk_noise_std = cfg.get_double("train.deltak");
    tc.gp_weight = cfg.get_double("train.gp_weight");
    tc.gp_eps = cfg.get_double("train.gp_eps");
    tc.seed = cfg.get_u64("seed");

    const fs::path dir = prepare_out_dir(cfg);
    const train::TrainResult result = train::train(dataset, tc);
    io::write_checkpoint((dir / "checkpoint.ckpt").string(), result.checkpoint);
    io::write_epoch_csv((dir / "epochs.csv").string(), result.stats);
    if (result.stats.empty())
        std::cout << "wrote untrained (epoch 0) checkpoint\n";
    else
        std::printf("epoch %d: loss %.6g penalty %.6g\n", result.stats.back().epoch,
                    result.stats.back().loss, result.stats.back().penalty);
    return 0;
}

int cmd_reconstruct(const std::vector<std::string>& args) {
    io::RunConfig cfg = base_config();
    cfg.declare("net", "");
    cfg.declare("mask", "");
    cfg.declare("image", "");
    cfg.declare("noise", "0");
    cfg.declare("png", "0");
    declare_pgd_keys(cfg);
    if (want_help(args)) return print_keys("reconstruct", cfg);
    merge_sources(cfg, args);

    for (const char* key : {"net", "mask", "image"})
        if (cfg.get(key).empty())
            throw std::invalid_argument(std::string("--") + key + " is required");

    const train::Checkpoint ckpt = io::read_checkpoint(cfg.get("net"));
    const icnn::ConvexNet net = train::net_from_checkpoint(ckpt);
    const fm::SamplingMask mask = io::read_mask(cfg.get("mask"));
    const Tensor image = io::read_image(cfg.get("image"));
    if (image.shape != std::vector<int>{2, mask.height, mask.width})
        throw std::invalid_argument("image must be 2x" + std::to_string(mask.height) + "x" +
                                    std::to_string(mask.width) + " to match the mask, got " +
                                    shape_str(image.shape));
    if (net.input_shape != image.shape)
        throw std::invalid_argument("checkpoint expects input " + shape_str(net.input_shape) +
                                    ", image is " + shape_str(image.shape));

    fm::Measurement b = fm::apply_A(mask, image);
    const double noise = cfg.get_double("noise");
    if (noise > 0.0) b = fm::add_noise(mask, b, noise, cfg.get_u64("seed"));

    solver::PGDConfig pgd = pgd_from_config(cfg);
    pgd.record_trace = true;
    pgd.ground_truth = &image;

    const fs::path dir = prepare_out_dir(cfg);
    const solver::ReconResult result = solver::pgd_reconstruct(net, mask, b, pgd);
    io::write_image((dir / "recon.img").string(), result.image);
    io::write_trace_csv((dir / "trace.csv").string(), result.trace);
    if (cfg.get_int("png") != 0)
        io::write_png_gray((dir / "recon.png").string(), metrics::magnitude_image(result.image));
    if (result.diverged) std::cerr << "warning: diverged, wrote last finite iterate\n";

    const Tensor ref_mag = metrics::magnitude_image(image);
    const Tensor rec_mag = metrics::magnitude_image(result.image);
    double peak = 0.0;
    for (std::size_t i = 0; i < ref_mag.size(); ++i) peak = std::max(peak, ref_mag[i]);
    if (peak <= 0.0) peak = 1.0;
    std::printf("%d iterations, psnr %.3f dB, nmse %.5g, ssim %.4f\n", result.iterations,
                metrics::psnr(ref_mag, rec_mag, peak), metrics::nmse(ref_mag, rec_mag),
                metrics::ssim(ref_mag, rec_mag));
    return 0;
}

int cmd_evaluate(const std::vector<std::string>& args) {
    io::RunConfig cfg = base_config();
    cfg.declare("data", "");
    cfg.declare("nets", "");
    cfg.declare("masks", "");
    cfg.declare("noise", "0");
    cfg.declare("tv.weight", "0.02");
    cfg.declare("tv.iters", "60");
    cfg.declare("threads", "1");
    declare_pgd_keys(cfg);
    if (want_help(args)) return print_keys("evaluate", cfg);
    merge_sources(cfg, args);

    const std::vector<Tensor> dataset = load_images(cfg.get("data"), "data");
    std::vector<train::Checkpoint> checkpoints;
    for (const std::string& path : split(cfg.get("nets"), ','))
        checkpoints.push_back(io::read_checkpoint(path));

    eval::EvalConfig ec;
    for (const std::string& path : split(cfg.get("masks"), ','))
        ec.masks.push_back(io::read_mask(path));
    if (ec.masks.empty()) throw std::invalid_argument("--masks is required");
    ec.noise_level = cfg.get_double("noise");
    ec.pgd = pgd_from_config(cfg);
    ec.tv_weight = cfg.get_double("tv.weight");
    ec.tv_iters = cfg.get_int("tv.iters");
    ec.threads = cfg.get_int("threads");
    ec.seed = cfg.get_u64("seed");

    const fs::path dir = prepare_out_dir(cfg);
    const std::vector<eval::MetricsRecord> records = eval::evaluate_suite(checkpoints, dataset, ec);
    io::write_metrics_csv((dir / "metrics.csv").string(), records);

    std::printf("%-12s %-18s %10s %10s %8s\n", "method", "mask", "nmse", "psnr_db", "ssim");
    for (const eval::MetricsRecord& r : records)
        if (r.aggregate)
            std::printf("%-12s %-18s %10.5f %10.3f %8.4f\n", r.method.c_str(), r.mask.c_str(),
                        r.nmse, r.psnr_db, r.ssim);
    return 0;
}

theory::ToyManifold manifold_from_config(const io::RunConfig& cfg) {
    const std::string name = cfg.get("manifold");
    const int dim = cfg.get_int("dim");
    if (dim < 1) throw std::invalid_argument("dim must be >= 1");
    if (name == "ball") return theory::ToyManifold::ball(std::vector<double>(dim, 0.0), 1.0);
    if (name == "segment")
        return theory::ToyManifold::segment(std::vector<double>(dim, -1.0),
                                            std::vector<double>(dim, 1.0));
    if (name == "triangle") {
        if (dim != 2) throw std::invalid_argument("the triangle manifold is 2-D");
        return theory::ToyManifold::polytope({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}});
    }
    throw std::invalid_argument("manifold must be ball, segment or triangle");
}

icnn::ConvexNet train_on_manifold(const theory::ToyManifold& m, const io::RunConfig& cfg) {
    Rng rng(cfg.get_u64("seed"));
    const int n = cfg.get_int("thm2.samples");
    if (n < 2) throw std::invalid_argument("thm2.samples must be >= 2");
    std::vector<Tensor> dataset;
    dataset.reserve(n);
    for (int i = 0; i < n; ++i) {
        const std::vector<double> p = theory::manifold_sample(m, rng);
        dataset.emplace_back(std::vector<int>{m.dim}, std::vector<double>(p.begin(), p.end()));
    }
    train::TrainConfig tc;
    tc.arch.family = icnn::ArchDesc::Family::Mlp;
    tc.arch.mlp.input_dim = m.dim;
    tc.arch.mlp.hidden = parse_int_list(cfg.get("thm2.hidden"), "thm2.hidden");
    tc.mode = train::Mode::CLEAR;
    tc.epochs = cfg.get_int("thm2.epochs");
    tc.batch_size = cfg.get_int("thm2.batch");
    tc.lr = cfg.get_double("thm2.lr");
    tc.gp_weight = cfg.get_double("thm2.gp_weight");
    tc.seed = cfg.get_u64("seed");
    return train::net_from_checkpoint(train::train(dataset, tc).checkpoint);
}

int cmd_verify(const std::vector<std::string>& args) {
    io::RunConfig cfg = base_config();
    cfg.declare("check", "all");
    cfg.declare("manifold", "ball");
    cfg.declare("dim", "2");
    cfg.declare("pairs", "10000");
    cfg.declare("thm2.samples", "256");
    cfg.declare("thm2.epochs", "100");
    cfg.declare("thm2.batch", "16");
    cfg.declare("thm2.lr", "0.01");
    cfg.declare("thm2.gp_weight", "1");
    cfg.declare("thm2.hidden", "32,32");
    cfg.declare("thm4.iters", "500");
    cfg.declare("thm4.c", "0.8");
    cfg.declare("thm5.trials", "8");
    if (want_help(args)) return print_keys("verify", cfg);
    merge_sources(cfg, args);

    const std::string check = cfg.get("check");
    const bool all = check == "all";
    if (!all && check != "prop1" && check != "thm2" && check != "thm4" && check != "thm5")
        throw std::invalid_argument("check must be prop1, thm2, thm4, thm5 or all");
    const std::uint64_t seed = cfg.get_u64("seed");

    std::vector<theory::VerificationReport> reports;
    if (all || check == "prop1")
        reports.push_back(theory::verify_distance_properties(manifold_from_config(cfg),
                                                             cfg.get_int("pairs"), seed));
    if (all || check == "thm2") {
        const theory::ToyManifold m = manifold_from_config(cfg);
        const icnn::ConvexNet net = train_on_manifold(m, cfg);
        reports.push_back(
            theory::verify_minima_on_manifold(net, m, theory::MinimaCheckConfig{}, seed + 1));
    }
    if (all || check == "thm4") {
        theory::ConvergenceCheckConfig cc;
        cc.pgd.max_iters = cfg.get_int("thm4.iters");
        cc.pgd.c = cfg.get_double("thm4.c");
        reports.push_back(theory::verify_pgd_convergence(theory::make_selector_instance(), cc));
    }
    if (all || check == "thm5") {
        theory::StabilityCheckConfig sc;
        sc.base.pgd.max_iters = cfg.get_int("thm4.iters");
        sc.base.pgd.c = cfg.get_double("thm4.c");
        sc.trials = cfg.get_int("thm5.trials");
        reports.push_back(theory::verify_stability(theory::make_selector_instance(), sc, seed));
    }

    const fs::path dir = prepare_out_dir(cfg);
    std::string text;
    for (const theory::VerificationReport& rep : reports) text += theory::report_text(rep) + "\n";
    io::write_text((dir / "report.txt").string(), text);
    io::write_report_csv((dir / "report.csv").string(), reports);
    std::cout << text;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    if (args.empty()) return usage(std::cerr);
    const std::string cmd = args.front();
    args.erase(args.begin());
    if (cmd == "--help" || cmd == "-h" || cmd == "help") {
        usage(std::cout);
        return 0;
    }
    try {
        if (cmd == "phantom-gen") return cmd_phantom_gen(args);
        if (cmd == "mask-gen") return cmd_mask_gen(args);
        if (cmd == "train") return cmd_train(args);
        if (cmd == "reconstruct") return cmd_reconstruct(args);
        if (cmd == "evaluate") return cmd_evaluate(args);
        if (cmd == "verify") return cmd_verify(args);
        std::cerr << "unknown command '" << cmd << "'\n\n";
        return usage(std::cerr);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
