// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "craft/evaluation.hpp"
#include "craft/parallel.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace craft;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

int jobs() { return static_cast<int>(std::clamp(std::thread::hardware_concurrency(), 1u, 4u)); }

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("craft_acceptance_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path());
    }
    return out;
}

/// Shared state: the default dataset and the default CRAFT run on it.
struct Context {
    Dataset ds;
    Model model;
    BatchRun craft;
    bool craft_done = false;

    Context() : ds(generate_dataset(3, GeneratorConfig{}, load_change_pairs(), jobs())), model(dataset_model(ds)) {}

    const BatchRun& craft_run() {
        if (!craft_done) {
            craft = attack_and_evaluate(model, ds, Method::Craft, AttackConfig{}, EvalConfig{}, jobs());
            craft_done = true;
        }
        return craft;
    }
};

Outcome geometry_oracles() {
    Rng rng(2024);
    int cover_mismatch = 0, iou_mismatch = 0;
    for (int n = 0; n < 1000; ++n) {
        const auto c = oracle::random_int_case(rng);
        cover_mismatch += box_to_tokens(oracle::box_of(c), oracle::geometry_of(c)) != oracle::pixel_cover(c);
    }
    for (int n = 0; n < 1000; ++n) {
        int b[8];
        for (int k = 0; k < 2; ++k) {
            b[4 * k] = rng.integer(0, 40);
            b[4 * k + 1] = rng.integer(0, 40);
            b[4 * k + 2] = rng.integer(b[4 * k] + 1, 48);
            b[4 * k + 3] = rng.integer(b[4 * k + 1] + 1, 48);
        }
        const double got = iou({double(b[0]), double(b[1]), double(b[2]), double(b[3])},
                               {double(b[4]), double(b[5]), double(b[6]), double(b[7])});
        iou_mismatch += std::abs(got - oracle::raster_iou(b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7])) > 1e-9;
    }
    return {cover_mismatch == 0 && iou_mismatch == 0,
            std::to_string(cover_mismatch) + " cover and " + std::to_string(iou_mismatch) + " IoU mismatches"};
}

Outcome gradient_check() {
    double worst = 0.0;
    std::string worst_name;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        ModelConfig cfg;
        cfg.seed = 9000 + seed;
        const Model m = Model::build(cfg, benchmark_categories());
        for (auto kind : gradcheck::all_kinds()) {
            const double err = gradcheck::max_relative_error(m, kind, seed, 20);
            if (err >= worst) {
                worst = err;
                worst_name = gradcheck::name(kind);
            }
        }
    }
    return {worst < 1e-4, "max relative error " + fmt("%.3g", worst) + " (" + worst_name + ")"};
}

Outcome projection_invariants() {
    const Dataset ds = generate_dataset(1, GeneratorConfig{}, load_change_pairs(), jobs());
    const Model m = dataset_model(ds);
    const AttackConfig cfg;
    std::atomic<long> violations{0}, iterates{0};
    const auto observer = [&](std::size_t index, int, const Image& adv) {
        long bad = 0;
        const auto& clean = ds.images[index].pixels();
        const auto& px = adv.pixels();
        for (std::size_t k = 0; k < px.size(); ++k) {
            bad += std::abs(px[k] - clean[k]) > cfg.epsilon || px[k] < 0.0 || px[k] > 1.0;
        }
        violations += bad;
        ++iterates;
    };
    attack_and_evaluate(m, ds, Method::Craft, cfg, EvalConfig{}, jobs(), observer, false);
    const long expected = static_cast<long>(ds.samples.size()) * cfg.iterations;
    return {violations == 0 && iterates == expected,
            std::to_string(violations.load()) + " violations over " + std::to_string(iterates.load()) + " iterates"};
}

Outcome clean_baseline(Context& ctx) {
    std::vector<SuccessVector> v(ctx.ds.samples.size());
    parallel_for(v.size(), jobs(), [&](std::size_t k) {
        v[k] = evaluate_sample(ctx.model, ctx.ds.images[k], ctx.ds.samples[k], EvalConfig{});
    });
    const auto r = compute_metrics(v, sample_tags(ctx.ds, ctx.model));
    const double worst = std::max({r.ic, r.od, r.rc, r.ol});
    return {worst <= 0.02 && r.ctsr4 == 0.0,
            "max rate " + fmt("%.4f", worst) + ", CTSR-4 " + fmt("%.4f", r.ctsr4) + " (n=" + std::to_string(r.n) +
                ")"};
}

Outcome attack_effectiveness(Context& ctx) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& run = ctx.craft_run();
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::vector<SuccessVector> swapped(ctx.ds.samples.size());
    for (std::size_t k = 0; k < swapped.size(); ++k) {
        const Sample& s = ctx.ds.samples[k];
        const TokenRect r = box_to_tokens(s.bbox, ctx.model.geometry(s.width, s.height));
        const Image img = oracle::paint_swap(ctx.model, ctx.ds.images[k], r, ctx.model.categories().require(s.target));
        swapped[k] = evaluate_sample(ctx.model, img, s, EvalConfig{});
    }
    const auto paint = compute_metrics(swapped, sample_tags(ctx.ds, ctx.model));
    const bool ok = run.report.ctsr4 >= 0.8 && run.report.rc >= 0.9 && paint.ctsr4 == 1.0 && seconds < 600.0;
    return {ok, "CRAFT CTSR-4 " + fmt("%.4f", run.report.ctsr4) + ", RC " + fmt("%.4f", run.report.rc) +
                    ", paint-swap CTSR-4 " + fmt("%.4f", paint.ctsr4) + ", " + fmt("%.1f s", seconds)};
}

Outcome ablation_direction(Context& ctx) {
    AttackConfig without;
    without.use_rtl = false;
    const auto off = attack_and_evaluate(ctx.model, ctx.ds, Method::Craft, without, EvalConfig{}, jobs(), {}, false);
    const double on = ctx.craft_run().report.ctsr4;
    return {on > off.report.ctsr4,
            "w/ RTL AllOthers " + fmt("%.4f", on) + " vs w/o RTL AllOthers " + fmt("%.4f", off.report.ctsr4)};
}

Outcome sweep_trend(Context& ctx) {
    const std::vector<double> eps{2.0 / 255, 4.0 / 255, 8.0 / 255, 16.0 / 255};
    const auto cells = run_sweep(ctx.model, ctx.ds, AttackConfig{}, eps, {100}, EvalConfig{}, jobs());
    int inversions = 0;
    double largest = 0.0;
    std::string series;
    for (std::size_t k = 0; k < cells.size(); ++k) {
        series += (k ? " " : "") + fmt("%.4f", cells[k].report.ctsr4);
        if (k > 0 && cells[k].report.ctsr4 < cells[k - 1].report.ctsr4) {
            ++inversions;
            largest = std::max(largest, cells[k - 1].report.ctsr4 - cells[k].report.ctsr4);
        }
    }
    return {inversions == 0 || (inversions == 1 && largest <= 0.05), "CTSR-4 by eps: " + series};
}

Outcome metric_identities() {
    Rng rng(77);
    const std::vector<std::string> supers{"A", "B", "C", "D"};
    int violations = 0;
    for (int n = 0; n < 1000; ++n) {
        const int size = rng.integer(1, 60);
        std::vector<SuccessVector> v;
        std::vector<SampleTag> tags;
        for (int k = 0; k < size; ++k) {
            v.push_back({rng.uniform() < 0.5, rng.uniform() < 0.5, rng.uniform() < 0.5, rng.uniform() < 0.5});
            const int a = rng.integer(0, 3), b = rng.integer(0, 3);
            tags.push_back({"s" + std::to_string(a), "t" + std::to_string(b), supers[a], supers[b]});
        }
        const auto r = compute_metrics(v, tags, supers);
        const auto o = oracle::recount(v);
        const bool same = r.ic == o.ic && r.od == o.od && r.rc == o.rc && r.ol == o.ol && r.avg == o.avg &&
                          r.ctsr4 == o.ctsr4 && r.ctsr3 == o.ctsr3;
        const bool ordered = r.ctsr4 <= r.ctsr3 && r.ctsr4 <= std::min({r.ic, r.od, r.rc, r.ol});
        const bool mean = std::abs(r.avg - (r.ic + r.od + r.rc + r.ol) / 4.0) <= 1e-15;
        violations += !(same && ordered && mean);
    }
    return {violations == 0, std::to_string(violations) + " violations over 1000 multisets"};
}

Outcome rtl_support(Context& ctx) {
    const auto& run = ctx.craft_run();
    const int P = ctx.model.config().patch;
    long outside = 0, inside = 0;
    for (const auto& res : run.results) {
        const Image& d = res.perturbation;
        for (int y = 0; y < d.height(); ++y) {
            for (int x = 0; x < d.width(); ++x) {
                for (int c = 0; c < d.channels(); ++c) {
                    const bool nonzero = d.at(y, x, c) != 0.0;
                    if (oracle::pixel_in_region(res.region, P, y, x)) {
                        inside += nonzero;
                    } else {
                        outside += nonzero;
                    }
                }
            }
        }
    }
    return {outside == 0 && !run.results.empty(),
            std::to_string(outside) + " nonzero entries outside R across " + std::to_string(run.results.size()) +
                " results (" + std::to_string(inside) + " inside)"};
}

Outcome benchmark_integrity(Context& ctx) {
    const std::map<std::string, int> expected{{"Vehicle", 8}, {"Outdoor", 5},    {"Animal", 10},    {"Accessory", 5},
                                              {"Sports", 10}, {"Kitchen", 7},    {"Food", 10},      {"Furniture", 6},
                                              {"Electronic", 6}, {"Appliance", 5}, {"Indoor", 7}};
    const auto pairs = load_change_pairs();
    std::map<std::string, int> counts;
    for (const auto& p : pairs) ++counts[p.supercategory];

    int invalid = 0;
    for (std::size_t k = 0; k < ctx.ds.samples.size(); ++k) {
        invalid += !validate_sample(ctx.ds.samples[k], ctx.ds.images[k], ctx.model, ctx.ds.generator).empty();
    }

    const fs::path a = scratch("ds_a"), b = scratch("ds_b");
    write_dataset(a, ctx.ds);
    write_dataset(b, read_dataset(dataset_json_path(a)));
    const bool round_trip = read_tree(a) == read_tree(b);
    fs::remove_all(a);
    fs::remove_all(b);

    return {pairs.size() == 79 && counts == expected && invalid == 0 && round_trip,
            std::to_string(pairs.size()) + " pairs, counts " + (counts == expected ? "match" : "differ") + ", " +
                std::to_string(invalid) + " invalid of " + std::to_string(ctx.ds.samples.size()) +
                " samples, round trip " + (round_trip ? "byte-exact" : "differs")};
}

Outcome reproducibility() {
    const fs::path root = scratch("repro");
    const std::string exe = CRAFTBENCH_EXE;
    std::string reports[2];
    for (int run = 0; run < 2; ++run) {
        const std::string dir = (root / ("run" + std::to_string(run))).string();
        const std::string quiet = " > " + dir + ".log 2>&1";
        const std::string cmds[] = {
            exe + " gen-dataset --per-pair 1 --seed 11 --out " + dir + "/ds" + quiet,
            exe + " attack --dataset " + dir + "/ds --seed 11 --jobs 2 --out " + dir + "/adv" + quiet,
            exe + " eval --dataset " + dir + "/ds --adv " + dir + "/adv --out " + dir + "/report.json" + quiet,
        };
        for (const auto& cmd : cmds) {
            if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + cmd};
        }
        reports[run] = read_file(dir + "/report.json");
    }
    fs::remove_all(root);
    const bool same = !reports[0].empty() && reports[0] == reports[1];
    return {same, "report.json " + std::string(same ? "identical" : "differs") + " (" +
                      std::to_string(reports[0].size()) + " bytes)"};
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        double limit_seconds;
        std::function<Outcome()> run;
    };
    // Constructed lazily so the first two criteria are timed without dataset generation.
    std::unique_ptr<Context> ctx;
    const auto shared = [&]() -> Context& {
        if (!ctx) ctx = std::make_unique<Context>();
        return *ctx;
    };
    const std::vector<Criterion> criteria{
        {"geometry oracles", 5.0, geometry_oracles},
        {"gradient check", 30.0, gradient_check},
        {"projection invariants", 0.0, projection_invariants},
        {"clean baseline", 0.0, [&] { return clean_baseline(shared()); }},
        {"attack effectiveness", 0.0, [&] { return attack_effectiveness(shared()); }},
        {"ablation direction", 0.0, [&] { return ablation_direction(shared()); }},
        {"sweep trend", 0.0, [&] { return sweep_trend(shared()); }},
        {"metric identities", 0.0, metric_identities},
        {"RTL support", 0.0, [&] { return rtl_support(shared()); }},
        {"benchmark integrity", 0.0, [&] { return benchmark_integrity(shared()); }},
        {"reproducibility", 0.0, reproducibility},
    };

    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = criteria[k].run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (criteria[k].limit_seconds > 0.0 && seconds >= criteria[k].limit_seconds) {
            out.pass = false;
            out.detail += "; exceeded " + fmt("%.0f s", criteria[k].limit_seconds);
        }
        failures += !out.pass;
        std::printf("%s [%2zu] %-22s %s (%.2f s)\n", out.pass ? "PASS" : "FAIL", k + 1, criteria[k].name,
                    out.detail.c_str(), seconds);
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
