#include "craft/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "craft/attacks.hpp"
#include "craft/benchmark.hpp"
#include "craft/evaluation.hpp"
#include "craft/image.hpp"
#include "craft/parallel.hpp"
#include "craft/random.hpp"
#include "craft/toy_model.hpp"

namespace craft {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

double parse_fraction(const std::string& text) {
    const auto slash = text.find('/');
    std::size_t used = 0;
    auto number = [&](const std::string& s) {
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("not a number: " + text);
        return v;
    };
    if (slash == std::string::npos) return number(text);
    const double den = number(text.substr(slash + 1));
    if (den == 0.0) throw std::invalid_argument("zero denominator: " + text);
    return number(text.substr(0, slash)) / den;
}

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << v;
    return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::uint64_t resolve_seed(const CLI::Option* opt, std::uint64_t flag_value) {
    if (opt->count() > 0) return flag_value;
    if (const char* env = std::getenv("CRAFTBENCH_SEED"); env != nullptr && *env != '\0') {
        try {
            std::size_t used = 0;
            const std::uint64_t v = std::stoull(env, &used);
            if (used == std::string(env).size()) return v;
        } catch (const std::exception&) {
        }
        throw UsageError(std::string("CRAFTBENCH_SEED is not an unsigned integer: ") + env);
    }
    return 0;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(text);
    while (std::getline(is, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string command_line(int argc, const char* const* argv) {
    std::string out;
    for (int k = 0; k < argc; ++k) {
        if (k > 0) out += ' ';
        out += argv[k];
    }
    return out;
}

void write_json(const fs::path& path, const ojson& j) { write_file_atomic(path, j.dump(2) + "\n"); }

/// Written before any result and rewritten atomically when the command ends.
class RunManifest {
public:
    RunManifest(fs::path path, std::string command, std::string cmd_line) : path_(std::move(path)) {
        j_["tool_version"] = kToolVersion;
        j_["command"] = std::move(command);
        j_["command_line"] = std::move(cmd_line);
        j_["status"] = "running";
    }

    void set(const std::string& key, ojson value) { j_[key] = std::move(value); }

    void dataset(const fs::path& dataset_path) {
        const fs::path json_path = dataset_json_path(dataset_path);
        j_["dataset"] = {{"path", fs::absolute(json_path).lexically_normal().string()},
                         {"fnv1a64", hex64(fnv1a64(read_file(json_path)))}};
    }

    void phase(const std::string& name, double seconds) { j_["wall_clock_seconds"][name] = seconds; }

    void write() const { write_json(path_, j_); }

    void finish(const std::string& status) {
        j_["status"] = status;
        write();
    }

private:
    fs::path path_;
    ojson j_;
};

struct CommonOptions {
    int jobs = 1;
};

fs::path adv_image_path(const fs::path& dir, const std::string& id) { return dir / (id + ".cvf"); }

// ---- gen-dataset -----------------------------------------------------------

struct GenOptions {
    std::string pairs_file;
    std::string config_file;
    int per_pair = 1;
    std::string out;
    std::uint64_t seed = 0;
    double noise = 0.01;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* noise_opt = nullptr;
};

int cmd_gen_dataset(const GenOptions& o, const CommonOptions& common) {
    if (o.per_pair < 1) throw UsageError("--per-pair must be at least 1");
    GeneratorConfig cfg;
    if (!o.config_file.empty()) {
        cfg = generator_config_from_json(nlohmann::json::parse(read_file(o.config_file)));
    }
    if (o.seed_opt->count() > 0 || std::getenv("CRAFTBENCH_SEED") != nullptr || o.config_file.empty()) {
        cfg.master_seed = resolve_seed(o.seed_opt, o.seed);
    }
    if (o.noise_opt->count() > 0) cfg.noise_sigma = o.noise;
    cfg.validate();

    std::vector<ChangePair> pairs;
    if (o.pairs_file.empty()) {
        pairs = load_change_pairs();
    } else {
        pairs = parse_change_pairs(nlohmann::json::parse(read_file(o.pairs_file)), benchmark_categories());
    }
    const Dataset ds = generate_dataset(o.per_pair, cfg, pairs, common.jobs);
    write_dataset(o.out, ds);
    std::cout << ds.samples.size() << " samples written to " << dataset_json_path(o.out).string() << "\n";
    return kExitOk;
}

// ---- attack ----------------------------------------------------------------

struct AttackOptions {
    std::string dataset;
    std::string method = "craft";
    std::string config_file;
    std::string eps = "16/255";
    std::string alpha = "4/255";
    int iters = 100;
    double tau = 0.9;
    std::string neg = "all";
    std::string agg = "mean";
    bool no_rtl = false;
    bool ascend = false;
    std::string box_source = "gt";
    std::string out;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;
    std::vector<CLI::Option*> overrides;
};

AttackConfig attack_config_from_options(const AttackOptions& o) {
    AttackConfig cfg;
    if (!o.config_file.empty()) cfg = attack_config_from_json(nlohmann::json::parse(read_file(o.config_file)));
    auto given = [&](const char* name) {
        return std::any_of(o.overrides.begin(), o.overrides.end(),
                           [&](const CLI::Option* opt) { return opt->get_name() == name && opt->count() > 0; });
    };
    auto budget = [](const std::string& text) {
        try {
            return parse_fraction(text);
        } catch (const std::exception& e) {
            throw UsageError(std::string("bad budget: ") + e.what());
        }
    };
    const bool from_file = !o.config_file.empty();
    if (!from_file || given("--eps")) cfg.epsilon = budget(o.eps);
    if (!from_file || given("--alpha")) cfg.alpha = budget(o.alpha);
    if (!from_file || given("--iters")) cfg.iterations = o.iters;
    if (!from_file || given("--tau")) cfg.tau = o.tau;
    if (!from_file || given("--neg")) {
        cfg.negatives = o.neg == "none" ? NegativeStrategy::None
                        : o.neg == "source" ? NegativeStrategy::SourceOnly
                                            : NegativeStrategy::AllOthers;
    }
    if (!from_file || given("--agg")) {
        cfg.aggregation = o.agg == "max" ? NegativeAggregation::Max : NegativeAggregation::Mean;
    }
    if (!from_file || given("--no-rtl")) cfg.use_rtl = !o.no_rtl;
    if (!from_file || given("--ascend")) cfg.direction = o.ascend ? StepDirection::Ascend : StepDirection::Descend;
    if (!from_file || given("--box-source")) {
        cfg.box_source = o.box_source == "det" ? BoxSource::CleanDetection : BoxSource::GroundTruth;
    }
    if (!from_file || o.seed_opt->count() > 0 || std::getenv("CRAFTBENCH_SEED") != nullptr) {
        cfg.seed = resolve_seed(o.seed_opt, o.seed);
    }
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return cfg;
}

bool is_surrogate(Method m) {
    return m == Method::TlmIc || m == Method::TlmOd || m == Method::TlmRc || m == Method::TlmOl;
}

ojson sample_result_json(const AttackResult& r, const AttackConfig& cfg, bool surrogate) {
    ojson j;
    j["method"] = r.method;
    j["surrogate"] = surrogate;
    j["config"] = to_json(cfg);
    j["iterations"] = r.iterations;
    j["region"] = {{"i_min", r.region.i_min}, {"i_max", r.region.i_max}, {"j_min", r.region.j_min},
                   {"j_max", r.region.j_max}};
    j["final_sims"] = {{"initial_target", r.initial_target_sim},
                       {"target", r.final_target_sim},
                       {"negative_mean", r.final_negative_sim}};
    j["loss_trace"] = r.loss_trace;
    return j;
}

int cmd_attack(const AttackOptions& o, const CommonOptions& common, const std::string& cmd_line) {
    const auto method = parse_method(o.method);
    if (!method) throw UsageError("unknown method: " + o.method);
    const AttackConfig cfg = attack_config_from_options(o);

    const fs::path out = o.out;
    fs::create_directories(out);
    RunManifest manifest(out / "manifest.json", "attack", cmd_line);
    auto t0 = std::chrono::steady_clock::now();
    const Dataset ds = read_dataset(o.dataset);
    const Model model = dataset_model(ds);
    manifest.dataset(o.dataset);
    manifest.set("model_config", to_json(model.config()));
    manifest.set("method", to_string(*method));
    manifest.set("surrogate", is_surrogate(*method));
    manifest.set("attack_config", to_json(cfg));
    manifest.set("eval_config", nullptr);
    manifest.phase("load", seconds_since(t0));
    manifest.write();

    t0 = std::chrono::steady_clock::now();
    std::vector<std::string> errors(ds.samples.size());
    std::mutex log_mutex;
    parallel_for(ds.samples.size(), common.jobs, [&](std::size_t k) {
        const Sample& s = ds.samples[k];
        try {
            const AttackResult r = run_attack(*method, model, ds.images[k], s, ds.generator, cfg);
            const Image stored = quantize_within_budget(r.adversarial, ds.images[k], cfg.epsilon);
            write_cvf(adv_image_path(out, s.id), stored);
            write_ppm(out / (s.id + ".ppm"), stored);
            write_json(out / (s.id + ".json"), sample_result_json(r, cfg, is_surrogate(*method)));
        } catch (const std::exception& e) {
            errors[k] = e.what();
            std::lock_guard lock(log_mutex);
            std::cerr << "attack failed for " << s.id << ": " << e.what() << "\n";
        }
    });
    manifest.phase("attack", seconds_since(t0));

    ojson failures = ojson::array();
    for (std::size_t k = 0; k < errors.size(); ++k) {
        if (!errors[k].empty()) failures.push_back({{"id", ds.samples[k].id}, {"error", errors[k]}});
    }
    const bool partial = !failures.empty();
    manifest.set("failures", std::move(failures));
    manifest.finish(partial ? "partial" : "ok");
    std::cout << ds.samples.size() << " samples attacked with " << to_string(*method) << " -> " << out.string()
              << "\n";
    return partial ? kExitPartial : kExitOk;
}

// ---- eval ------------------------------------------------------------------

struct EvalOptions {
    std::string dataset;
    std::string adv;
    double theta_box = 0.6;
    double theta_loc = 0.6;
    std::string out = "report.json";
    std::string heatmap;
};

int cmd_eval(const EvalOptions& o, const CommonOptions& common) {
    EvalConfig ec{o.theta_box, o.theta_loc};
    try {
        ec.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const Dataset ds = read_dataset(o.dataset);
    const Model model = dataset_model(ds);
    const fs::path adv_dir = o.adv;

    std::vector<std::string> missing;
    for (const auto& s : ds.samples) {
        if (!fs::exists(adv_image_path(adv_dir, s.id))) missing.push_back(adv_image_path(adv_dir, s.id).string());
    }
    if (!missing.empty()) {
        std::cerr << missing.size() << " adversarial file(s) missing:\n";
        for (const auto& m : missing) std::cerr << "  " << m << "\n";
        return kExitPartial;
    }

    std::vector<SuccessVector> success(ds.samples.size());
    parallel_for(ds.samples.size(), common.jobs, [&](std::size_t k) {
        const Image adv = read_cvf(adv_image_path(adv_dir, ds.samples[k].id));
        success[k] = evaluate_sample(model, adv, ds.samples[k], ec);
    });
    const MetricsReport report = compute_metrics(success, sample_tags(ds, model), supercategories(ds.pairs));
    write_json(o.out, to_json(report));
    if (!o.heatmap.empty()) write_file_atomic(o.heatmap, heatmap_csv(report));

    std::string label = adv_dir.filename().string();
    if (label.empty()) label = adv_dir.parent_path().filename().string();
    if (fs::exists(adv_dir / "manifest.json")) {
        const auto m = nlohmann::json::parse(read_file(adv_dir / "manifest.json"));
        label = m.value("method", label);
        if (m.value("surrogate", false)) label += " (surrogate)";
    }
    std::cout << format_table({{label, report}});
    return kExitOk;
}

// ---- sweep / ablate --------------------------------------------------------

struct SweepOptions {
    std::string dataset;
    std::string eps_list = "2/255,4/255,8/255,16/255";
    std::string iters_list = "100";
    std::string out;
    double theta_box = 0.6;
    double theta_loc = 0.6;
};

int cmd_sweep(const SweepOptions& o, const CommonOptions& common, const std::string& cmd_line) {
    std::vector<double> eps;
    std::vector<int> iters;
    try {
        for (const auto& e : split_list(o.eps_list)) eps.push_back(parse_fraction(e));
        for (const auto& t : split_list(o.iters_list)) {
            std::size_t used = 0;
            const int v = std::stoi(t, &used);
            if (used != t.size() || v < 1) throw std::invalid_argument(t);
            iters.push_back(v);
        }
    } catch (const std::exception& e) {
        throw UsageError(std::string("bad sweep list entry: ") + e.what());
    }
    if (eps.empty() || iters.empty()) throw UsageError("--eps-list and --iters-list must be non-empty");
    for (double e : eps) {
        if (!(e >= 0.0 && e <= 1.0)) throw UsageError("epsilon outside [0, 1]");
    }
    const EvalConfig ec{o.theta_box, o.theta_loc};

    const fs::path out = o.out;
    fs::create_directories(out / "cells");
    RunManifest manifest(out / "manifest.json", "sweep", cmd_line);
    const Dataset ds = read_dataset(o.dataset);
    const Model model = dataset_model(ds);
    manifest.dataset(o.dataset);
    manifest.set("model_config", to_json(model.config()));
    manifest.set("attack_config", to_json(AttackConfig{}));
    manifest.set("eval_config", to_json(ec));
    manifest.write();

    const auto cells = run_sweep(model, ds, AttackConfig{}, eps, iters, ec, common.jobs);
    for (std::size_t k = 0; k < cells.size(); ++k) {
        const auto& c = cells[k];
        char name[96];
        std::snprintf(name, sizeof name, "cell%02zu_eps%.6f_iters%d.json", k, c.epsilon, c.iterations);
        write_json(out / "cells" / name, to_json(c.report));
        manifest.phase(name, c.seconds);
    }
    write_file_atomic(out / "sweep.csv", sweep_csv(cells));
    manifest.finish("ok");
    std::cout << sweep_csv(cells);
    return kExitOk;
}

struct AblateOptions {
    std::string dataset;
    std::string out;
    double theta_box = 0.6;
    double theta_loc = 0.6;
};

int cmd_ablate(const AblateOptions& o, const CommonOptions& common, const std::string& cmd_line) {
    const EvalConfig ec{o.theta_box, o.theta_loc};
    const fs::path out = o.out;
    fs::create_directories(out / "cells");
    RunManifest manifest(out / "manifest.json", "ablate", cmd_line);
    const Dataset ds = read_dataset(o.dataset);
    const Model model = dataset_model(ds);
    manifest.dataset(o.dataset);
    manifest.set("model_config", to_json(model.config()));
    manifest.set("attack_config", to_json(AttackConfig{}));
    manifest.set("eval_config", to_json(ec));
    manifest.write();

    const auto cells = run_ablation(model, ds, AttackConfig{}, ec, common.jobs);
    std::vector<std::pair<std::string, MetricsReport>> rows;
    for (const auto& c : cells) {
        const std::string name = std::string("rtl-") + (c.use_rtl ? "on" : "off") + "_neg-" + to_string(c.negatives);
        write_json(out / "cells" / (name + ".json"), to_json(c.report));
        manifest.phase(name, c.seconds);
        rows.emplace_back(name, c.report);
    }
    write_file_atomic(out / "ablation.csv", ablation_csv(cells));
    manifest.finish("ok");
    std::cout << format_table(rows);
    return kExitOk;
}

// ---- render ----------------------------------------------------------------

struct RenderOptions {
    std::string adv;
    std::string sample;
    std::string dataset;
    double amplify = 10.0;
    std::string out;
};

int cmd_render(const RenderOptions& o) {
    const fs::path adv_dir = o.adv;
    std::string dataset = o.dataset;
    if (dataset.empty()) {
        const fs::path mpath = adv_dir / "manifest.json";
        if (!fs::exists(mpath)) throw UsageError("no manifest in " + adv_dir.string() + "; pass --dataset");
        dataset = nlohmann::json::parse(read_file(mpath)).at("dataset").at("path").get<std::string>();
    }
    const Dataset ds = read_dataset(dataset);
    const auto it = std::find_if(ds.samples.begin(), ds.samples.end(),
                                 [&](const Sample& s) { return s.id == o.sample; });
    if (it == ds.samples.end()) throw UsageError("unknown sample id: " + o.sample);
    const Image& clean = ds.images[static_cast<std::size_t>(it - ds.samples.begin())];
    const fs::path adv_path = adv_image_path(adv_dir, o.sample);
    if (!fs::exists(adv_path)) throw std::runtime_error("no adversarial image at " + adv_path.string());
    const Image adv = read_cvf(adv_path);
    if (!adv.same_shape(clean)) throw std::runtime_error("adversarial image shape differs from clean image");

    const int h = clean.height(), w = clean.width(), ch = clean.channels();
    Image panel(h, 3 * w, ch);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                const double a = clean.at(y, x, c), b = adv.at(y, x, c);
                panel.at(y, x, c) = a;
                panel.at(y, w + x, c) = b;
                panel.at(y, 2 * w + x, c) = std::clamp(0.5 + o.amplify * (b - a), 0.0, 1.0);
            }
        }
    }
    write_ppm(o.out, panel);
    std::cout << "wrote " << o.out << " (" << 3 * w << "x" << h << ")\n";
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Cross-task region attack benchmark on a toy unified vision-language model", "craftbench"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    CommonOptions common;
    auto add_jobs = [&](CLI::App* sub) {
        sub->add_option("--jobs,-j", common.jobs, "Worker threads")->check(CLI::PositiveNumber);
    };

    GenOptions gen;
    auto* gen_cmd = app.add_subcommand("gen-dataset", "Generate a synthetic object-change dataset");
    gen_cmd->add_option("--pairs-file", gen.pairs_file, "JSON array of {source,target,supercategory}")
        ->check(CLI::ExistingFile);
    gen_cmd->add_option("--config", gen.config_file, "Generator config JSON")->check(CLI::ExistingFile);
    gen_cmd->add_option("--per-pair", gen.per_pair, "Samples per change pair")->capture_default_str();
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();
    gen.seed_opt = gen_cmd->add_option("--seed", gen.seed, "Master seed (default: $CRAFTBENCH_SEED or 0)");
    gen.noise_opt = gen_cmd->add_option("--noise", gen.noise, "Gaussian pixel noise sigma")->capture_default_str();
    add_jobs(gen_cmd);

    AttackOptions atk;
    auto* atk_cmd = app.add_subcommand("attack", "Attack every sample of a dataset");
    atk_cmd->add_option("--dataset", atk.dataset, "Dataset directory or dataset.json")->required();
    atk_cmd->add_option("--method", atk.method, "craft, mfit, mfii, tlm-ic, tlm-od, tlm-rc, tlm-ol or none")
        ->capture_default_str();
    atk_cmd->add_option("--config", atk.config_file, "Attack config JSON; flags given explicitly override it")
        ->check(CLI::ExistingFile);
    atk.overrides.push_back(atk_cmd->add_option("--eps", atk.eps, "L-inf budget")->capture_default_str());
    atk.overrides.push_back(atk_cmd->add_option("--alpha", atk.alpha, "Step size")->capture_default_str());
    atk.overrides.push_back(atk_cmd->add_option("--iters", atk.iters, "PGD iterations")->capture_default_str());
    atk.overrides.push_back(atk_cmd->add_option("--tau", atk.tau, "Contrastive margin")->capture_default_str());
    atk.overrides.push_back(atk_cmd->add_option("--neg", atk.neg, "Negative set")
                                ->check(CLI::IsMember({"none", "source", "all"}))
                                ->capture_default_str());
    atk.overrides.push_back(atk_cmd->add_option("--agg", atk.agg, "Negative aggregation")
                                ->check(CLI::IsMember({"mean", "max"}))
                                ->capture_default_str());
    atk.overrides.push_back(atk_cmd->add_flag("--no-rtl", atk.no_rtl, "Attack all tokens instead of the region"));
    atk.overrides.push_back(atk_cmd->add_flag("--ascend", atk.ascend, "Step along the loss gradient sign"));
    atk.overrides.push_back(atk_cmd->add_option("--box-source", atk.box_source, "Attack box origin")
                                ->check(CLI::IsMember({"gt", "det"}))
                                ->capture_default_str());
    atk_cmd->add_option("--out", atk.out, "Output directory")->required();
    atk.seed_opt = atk_cmd->add_option("--seed", atk.seed, "Attack seed (default: $CRAFTBENCH_SEED or 0)");
    add_jobs(atk_cmd);

    EvalOptions ev;
    auto* ev_cmd = app.add_subcommand("eval", "Evaluate adversarial images on all four tasks");
    ev_cmd->add_option("--dataset", ev.dataset, "Dataset directory or dataset.json")->required();
    ev_cmd->add_option("--adv", ev.adv, "Attack output directory")->required();
    ev_cmd->add_option("--theta-box", ev.theta_box, "Detection IoU threshold")->capture_default_str();
    ev_cmd->add_option("--theta-loc", ev.theta_loc, "Localization IoU threshold")->capture_default_str();
    ev_cmd->add_option("--out", ev.out, "Report JSON path")->capture_default_str();
    ev_cmd->add_option("--heatmap", ev.heatmap, "Supercategory CTSR-4 heatmap CSV path");
    add_jobs(ev_cmd);

    SweepOptions sw;
    auto* sw_cmd = app.add_subcommand("sweep", "CRAFT over an epsilon x iterations grid (alpha = eps/4)");
    sw_cmd->add_option("--dataset", sw.dataset, "Dataset directory or dataset.json")->required();
    sw_cmd->add_option("--eps-list", sw.eps_list, "Comma-separated budgets")->capture_default_str();
    sw_cmd->add_option("--iters-list", sw.iters_list, "Comma-separated iteration counts")->capture_default_str();
    sw_cmd->add_option("--theta-box", sw.theta_box, "Detection IoU threshold")->capture_default_str();
    sw_cmd->add_option("--theta-loc", sw.theta_loc, "Localization IoU threshold")->capture_default_str();
    sw_cmd->add_option("--out", sw.out, "Output directory")->required();
    add_jobs(sw_cmd);

    AblateOptions ab;
    auto* ab_cmd = app.add_subcommand("ablate", "Region tokens x negative-set ablation");
    ab_cmd->add_option("--dataset", ab.dataset, "Dataset directory or dataset.json")->required();
    ab_cmd->add_option("--theta-box", ab.theta_box, "Detection IoU threshold")->capture_default_str();
    ab_cmd->add_option("--theta-loc", ab.theta_loc, "Localization IoU threshold")->capture_default_str();
    ab_cmd->add_option("--out", ab.out, "Output directory")->required();
    add_jobs(ab_cmd);

    RenderOptions rd;
    auto* rd_cmd = app.add_subcommand("render", "Side-by-side clean | adversarial | amplified perturbation PPM");
    rd_cmd->add_option("--adv", rd.adv, "Attack output directory")->required();
    rd_cmd->add_option("--sample", rd.sample, "Sample id")->required();
    rd_cmd->add_option("--dataset", rd.dataset, "Dataset override (default: from the run manifest)");
    rd_cmd->add_option("--amplify", rd.amplify, "Perturbation gain around mid-gray")->capture_default_str();
    rd_cmd->add_option("--out", rd.out, "Output PPM path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    const std::string cmd_line = command_line(argc, argv);
    try {
        if (gen_cmd->parsed()) return cmd_gen_dataset(gen, common);
        if (atk_cmd->parsed()) return cmd_attack(atk, common, cmd_line);
        if (ev_cmd->parsed()) return cmd_eval(ev, common);
        if (sw_cmd->parsed()) return cmd_sweep(sw, common, cmd_line);
        if (ab_cmd->parsed()) return cmd_ablate(ab, common, cmd_line);
        if (rd_cmd->parsed()) return cmd_render(rd);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPartial;
    }
    return kExitUsage;
}

}  // namespace craft
