#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "craft/evaluation.hpp"
#include "oracles.hpp"

using namespace craft;

namespace {

const Model& default_model() {
    static const Model m = Model::build(ModelConfig{}, benchmark_categories());
    return m;
}

/// A handful of pairs spanning four supercategories, one sample each.
const Dataset& small_dataset() {
    static const Dataset ds = [] {
        const auto all = load_change_pairs();
        std::vector<ChangePair> pairs;
        for (const char* src : {"cat", "dog", "bicycle", "car", "microwave", "pizza", "couch", "laptop"}) {
            for (const auto& p : all) {
                if (p.source == src) {
                    pairs.push_back(p);
                    break;
                }
            }
        }
        GeneratorConfig gen;
        gen.master_seed = 4;
        return generate_dataset(1, gen, pairs);
    }();
    return ds;
}

SuccessVector sv(const char* bits) { return {bits[0] == '1', bits[1] == '1', bits[2] == '1', bits[3] == '1'}; }

Detection det(BBox b, int cat) { return {b, cat, 0.9}; }

}  // namespace

TEST_CASE("caption success") {
    const int cat = 3, dog = 4;
    CaptionOutput c;
    c.categories = {dog};
    CHECK(success_caption(c, cat, dog));
    c.categories = {dog, cat};
    CHECK_FALSE(success_caption(c, cat, dog));
    c.categories = {};
    CHECK_FALSE(success_caption(c, cat, dog));
    c.categories = {7, dog};
    CHECK(success_caption(c, cat, dog));
}

TEST_CASE("detection success") {
    const BBox bs{0, 0, 10, 10};
    CHECK(success_detection({det(bs, 2)}, bs, 1, 2, 0.6));
    // IoU 0.5 does not clear 0.6.
    CHECK_FALSE(success_detection({det({0, 0, 10, 5}, 2)}, bs, 1, 2, 0.6));
    CHECK_FALSE(success_detection({det(bs, 1)}, bs, 1, 2, 0.6));
    CHECK(success_detection({det(bs, 1), det({1, 1, 10, 10}, 2)}, bs, 1, 2, 0.6));
    CHECK_FALSE(success_detection({}, bs, 1, 2, 0.6));
    // Exactly at the threshold is not enough.
    CHECK_FALSE(success_detection({det({0, 0, 10, 6}, 2)}, bs, 1, 2, 0.6));
}

TEST_CASE("region success") {
    CHECK(success_region(5, 5));
    CHECK_FALSE(success_region(4, 5));
    CHECK_FALSE(success_region(9, 5));
}

TEST_CASE("localization success") {
    const BBox bs{0, 0, 10, 10};
    CHECK(success_localization(bs, bs, 0.6));
    CHECK_FALSE(success_localization(std::nullopt, bs, 0.6));
    REQUIRE(iou({0, 0, 10, 6}, bs) == 0.6);
    CHECK_FALSE(success_localization(BBox{0, 0, 10, 6}, bs, 0.6));
    CHECK(success_localization(BBox{0, 0, 10, 7}, bs, 0.6));
}

TEST_CASE("eval config") {
    CHECK_NOTHROW(EvalConfig{}.validate());
    CHECK_THROWS_AS((EvalConfig{0.0, 0.6}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((EvalConfig{0.6, 1.0}.validate()), std::invalid_argument);
}

TEST_CASE("clean images fail every task") {
    const Model& m = default_model();
    GeneratorConfig gen;
    gen.master_seed = 21;
    const Dataset ds = generate_dataset(1, gen, load_change_pairs());
    int all_false = 0;
    for (std::size_t k = 0; k < ds.samples.size(); ++k) {
        all_false += evaluate_sample(m, ds.images[k], ds.samples[k], EvalConfig{}).count() == 0;
    }
    CHECK(all_false >= 0.98 * static_cast<double>(ds.samples.size()));
}

TEST_CASE("paint-swap oracle fools all four tasks") {
    const Model& m = default_model();
    GeneratorConfig gen;
    gen.master_seed = 22;
    const Dataset ds = generate_dataset(1, gen, load_change_pairs());
    for (std::size_t k = 0; k < ds.samples.size(); ++k) {
        const auto& s = ds.samples[k];
        const TokenRect r = box_to_tokens(s.bbox, m.geometry(s.width, s.height));
        const Image swapped = oracle::paint_swap(m, ds.images[k], r, m.categories().require(s.target));
        INFO(s.id);
        REQUIRE(evaluate_sample(m, swapped, s, EvalConfig{}) == sv("1111"));
    }
}

TEST_CASE("a small-budget region attack can fool only the region task") {
    const Model& m = default_model();
    const auto pairs = load_change_pairs();
    bool found = false;
    for (std::uint64_t k = 0; k < 60 && !found; ++k) {
        const Scene s = synthesize_scene(pairs[k % 79], m, GeneratorConfig{}, 50 + k);
        for (double eps : {2.0 / 255, 4.0 / 255, 6.0 / 255, 8.0 / 255}) {
            AttackConfig cfg;
            cfg.epsilon = eps;
            cfg.alpha = eps / 4;
            const auto r = tlm_attack(m, s.image, s.sample, TlmTask::RC, cfg);
            if (evaluate_sample(m, r.adversarial, s.sample, EvalConfig{}) == sv("0010")) {
                found = true;
                break;
            }
        }
    }
    CHECK(found);
}

TEST_CASE("evaluate_sample is pure") {
    const Model& m = default_model();
    const Dataset& ds = small_dataset();
    for (std::size_t k = 0; k < ds.samples.size(); ++k) {
        CHECK(evaluate_sample(m, ds.images[k], ds.samples[k], EvalConfig{}) ==
              evaluate_sample(m, ds.images[k], ds.samples[k], EvalConfig{}));
    }
}

TEST_CASE("metric examples") {
    const std::vector<SuccessVector> v{sv("1111"), sv("1110"), sv("0111"), sv("1010")};
    const auto r = compute_metrics(v, {});
    CHECK(r.n == 4);
    CHECK(r.ctsr4 == 0.25);
    CHECK(r.ctsr3 == 0.75);
    CHECK(r.ic == 0.75);
    CHECK(r.od == 0.75);
    CHECK(r.rc == 1.0);
    CHECK(r.ol == 0.5);
    CHECK(r.avg == 0.75);

    const auto all = compute_metrics(std::vector<SuccessVector>(10, sv("1111")), {});
    for (double x : {all.ic, all.od, all.rc, all.ol, all.avg, all.ctsr4, all.ctsr3}) CHECK(x == 1.0);
    const auto none = compute_metrics(std::vector<SuccessVector>(10, sv("0000")), {});
    for (double x : {none.ic, none.od, none.rc, none.ol, none.avg, none.ctsr4, none.ctsr3}) CHECK(x == 0.0);

    CHECK_THROWS_AS(compute_metrics(std::vector<SuccessVector>{}, {}), std::invalid_argument);
    const std::vector<SampleTag> one_tag{{"a", "b", "X", "Y"}};
    CHECK_THROWS_AS(compute_metrics(v, one_tag), std::invalid_argument);
}

TEST_CASE("metrics match the recount oracle on random multisets") {
    Rng rng(1);
    const std::vector<std::string> supers{"A", "B", "C"};
    for (int n = 0; n < 1000; ++n) {
        const int size = rng.integer(1, 40);
        std::vector<SuccessVector> v;
        std::vector<SampleTag> tags;
        for (int k = 0; k < size; ++k) {
            v.push_back({rng.uniform() < 0.5, rng.uniform() < 0.5, rng.uniform() < 0.5, rng.uniform() < 0.5});
            const int a = rng.integer(0, 2), b = rng.integer(0, 2);
            tags.push_back({"s" + std::to_string(a), "t" + std::to_string(b), supers[a], supers[b]});
        }
        const auto r = compute_metrics(v, tags, supers);
        const auto o = oracle::recount(v);
        REQUIRE(r.ic == o.ic);
        REQUIRE(r.od == o.od);
        REQUIRE(r.rc == o.rc);
        REQUIRE(r.ol == o.ol);
        REQUIRE(r.avg == o.avg);
        REQUIRE(r.ctsr4 == o.ctsr4);
        REQUIRE(r.ctsr3 == o.ctsr3);
        REQUIRE(r.ctsr4 <= r.ctsr3);
        REQUIRE(r.ctsr3 <= 1.0);
        REQUIRE(r.ctsr4 <= std::min({r.ic, r.od, r.rc, r.ol}));

        // Per-pair and heatmap cells by brute force.
        std::map<std::pair<std::string, std::string>, std::pair<int, int>> pairs, cells;
        for (int k = 0; k < size; ++k) {
            auto& p = pairs[{tags[k].source, tags[k].target}];
            ++p.first;
            p.second += v[k].all();
            auto& c = cells[{tags[k].source_super, tags[k].target_super}];
            ++c.first;
            c.second += v[k].all();
        }
        REQUIRE(r.per_pair.size() == pairs.size());
        for (const auto& p : r.per_pair) {
            const auto& e = pairs.at({p.source, p.target});
            REQUIRE(p.n == e.first);
            REQUIRE(p.all_four == e.second);
            REQUIRE(p.ctsr4 == static_cast<double>(e.second) / e.first);
        }
        REQUIRE(r.heatmap.labels == supers);
        for (std::size_t a = 0; a < 3; ++a) {
            for (std::size_t b = 0; b < 3; ++b) {
                const double got = r.heatmap.matrix[a * 3 + b];
                const auto it = cells.find({supers[a], supers[b]});
                if (it == cells.end()) {
                    REQUIRE(std::isnan(got));
                } else {
                    REQUIRE(got == static_cast<double>(it->second.second) / it->second.first);
                }
            }
        }
    }
}

TEST_CASE("report serialization") {
    const std::vector<SuccessVector> v{sv("1111"), sv("0000")};
    const std::vector<SampleTag> tags{{"cat", "dog", "Animal", "Animal"}, {"car", "bus", "Vehicle", "Vehicle"}};
    const auto r = compute_metrics(v, tags);
    const auto j = to_json(r);
    CHECK(j.at("n") == 2);
    CHECK(j.at("rates").at("ic") == 0.5);
    CHECK(j.at("ctsr4") == 0.5);
    CHECK(j.at("per_pair").size() == 2);
    CHECK(j.at("per_pair").at(0).at("source") == "cat");
    CHECK(j.at("heatmap").at("labels") == nlohmann::ordered_json::array({"Animal", "Vehicle"}));
    CHECK(j.at("heatmap").at("matrix").at(0).at(0) == 1.0);
    CHECK(j.at("heatmap").at("matrix").at(0).at(1).is_null());

    const std::string csv = heatmap_csv(r);
    CHECK(csv == "source\\target,Animal,Vehicle\nAnimal,1.000000,nan\nVehicle,nan,0.000000\n");

    const std::string table = format_table({{"craft", r}});
    CHECK(table.find("IC") != std::string::npos);
    CHECK(table.find("CTSR-3") != std::string::npos);
    CHECK(table.find("craft") != std::string::npos);
}

TEST_CASE("bundled heatmap is 11 x 11") {
    const auto pairs = load_change_pairs();
    std::vector<SuccessVector> v;
    std::vector<SampleTag> tags;
    const Model& m = default_model();
    for (const auto& p : pairs) {
        v.push_back(sv("1010"));
        tags.push_back({p.source, p.target, p.supercategory,
                        m.categories().at(m.categories().require(p.target)).supercategory});
    }
    const auto r = compute_metrics(v, tags, supercategories(pairs));
    CHECK(r.heatmap.labels.size() == 11);
    CHECK(r.heatmap.matrix.size() == 121);
    const std::string csv = heatmap_csv(r);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 12);
}

TEST_CASE("sample tags") {
    const Dataset& ds = small_dataset();
    const auto tags = sample_tags(ds, default_model());
    REQUIRE(tags.size() == ds.samples.size());
    CHECK(tags[0].source == "cat");
    CHECK(tags[0].source_super == "Animal");
    CHECK(tags[0].target_super == "Animal");
}

TEST_CASE("batch runs are independent of the worker count") {
    const Model& m = default_model();
    const Dataset& ds = small_dataset();
    AttackConfig cfg;
    cfg.iterations = 20;
    const auto a = attack_and_evaluate(m, ds, Method::Craft, cfg, EvalConfig{}, 1);
    const auto b = attack_and_evaluate(m, ds, Method::Craft, cfg, EvalConfig{}, 3);
    CHECK(to_json(a.report).dump() == to_json(b.report).dump());
    CHECK(a.success == b.success);
    REQUIRE(a.results.size() == ds.samples.size());
    CHECK(a.results[0].adversarial == b.results[0].adversarial);
    const auto c = attack_and_evaluate(m, ds, Method::Craft, cfg, EvalConfig{}, 1, {}, false);
    CHECK(c.results.empty());
    CHECK(c.success == a.success);
}

TEST_CASE("sweep grid") {
    const Model& m = default_model();
    const Dataset& ds = small_dataset();
    AttackConfig base;
    const auto single = run_sweep(m, ds, base, {16.0 / 255}, {100}, EvalConfig{});
    REQUIRE(single.size() == 1);
    CHECK(single[0].alpha == 4.0 / 255);
    const auto direct = attack_and_evaluate(m, ds, Method::Craft, base, EvalConfig{});
    CHECK(to_json(single[0].report).dump() == to_json(direct.report).dump());

    const auto grid = run_sweep(m, ds, base, {2.0 / 255, 8.0 / 255}, {5, 10, 20}, EvalConfig{});
    REQUIRE(grid.size() == 6);
    CHECK(grid[0].epsilon == 2.0 / 255);
    CHECK(grid[0].iterations == 5);
    CHECK(grid[5].epsilon == 8.0 / 255);
    CHECK(grid[5].iterations == 20);
    for (const auto& c : grid) CHECK(c.alpha == c.epsilon / 4);
    const std::string csv = sweep_csv(grid);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
    CHECK(csv.rfind("eps,alpha,iters,", 0) == 0);
    CHECK_THROWS_AS(run_sweep(m, ds, base, {}, {10}, EvalConfig{}), std::invalid_argument);
}

TEST_CASE("ablation grid") {
    const Model& m = default_model();
    const Dataset& ds = small_dataset();
    const auto cells = run_ablation(m, ds, AttackConfig{}, EvalConfig{});
    REQUIRE(cells.size() == 6);
    CHECK_FALSE(cells[0].use_rtl);
    CHECK(cells[0].negatives == NegativeStrategy::None);
    CHECK(cells[4].negatives == NegativeStrategy::SourceOnly);
    CHECK(cells[5].use_rtl);
    CHECK(cells[5].negatives == NegativeStrategy::AllOthers);
    const auto direct = attack_and_evaluate(m, ds, Method::Craft, AttackConfig{}, EvalConfig{});
    CHECK(to_json(cells[5].report).dump() == to_json(direct.report).dump());
    for (const auto& c : cells) CHECK(c.report.ctsr4 <= c.report.ctsr3);
    const std::string csv = ablation_csv(cells);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
    CHECK(csv.find("on,all,") != std::string::npos);
}
