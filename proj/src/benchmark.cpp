#include "craft/benchmark.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "craft/parallel.hpp"
#include "craft/random.hpp"

namespace craft {

namespace {

struct PairRow {
    const char* source;
    const char* target;
    const char* supercategory;
};

// Source -> target object changes, grouped by supercategory.
constexpr std::array<PairRow, 79> kPairs{{
    {"bicycle", "motorcycle", "Vehicle"},
    {"motorcycle", "bicycle", "Vehicle"},
    {"car", "bus", "Vehicle"},
    {"bus", "truck", "Vehicle"},
    {"train", "airplane", "Vehicle"},
    {"truck", "car", "Vehicle"},
    {"airplane", "bus", "Vehicle"},
    {"boat", "train", "Vehicle"},
    {"traffic light", "stop sign", "Outdoor"},
    {"fire hydrant", "stop sign", "Outdoor"},
    {"stop sign", "traffic light", "Outdoor"},
    {"parking meter", "bench", "Outdoor"},
    {"bench", "parking meter", "Outdoor"},
    {"bird", "cat", "Animal"},
    {"cat", "dog", "Animal"},
    {"dog", "cat", "Animal"},
    {"horse", "sheep", "Animal"},
    {"sheep", "cow", "Animal"},
    {"cow", "horse", "Animal"},
    {"elephant", "bear", "Animal"},
    {"bear", "elephant", "Animal"},
    {"zebra", "giraffe", "Animal"},
    {"giraffe", "zebra", "Animal"},
    {"backpack", "handbag", "Accessory"},
    {"umbrella", "handbag", "Accessory"},
    {"handbag", "suitcase", "Accessory"},
    {"tie", "handbag", "Accessory"},
    {"suitcase", "backpack", "Accessory"},
    {"frisbee", "sports ball", "Sports"},
    {"skis", "snowboard", "Sports"},
    {"snowboard", "skateboard", "Sports"},
    {"sports ball", "kite", "Sports"},
    {"kite", "baseball bat", "Sports"},
    {"baseball bat", "baseball glove", "Sports"},
    {"baseball glove", "tennis racket", "Sports"},
    {"skateboard", "surfboard", "Sports"},
    {"surfboard", "skis", "Sports"},
    {"tennis racket", "frisbee", "Sports"},
    {"bottle", "wine glass", "Kitchen"},
    {"wine glass", "cup", "Kitchen"},
    {"cup", "fork", "Kitchen"},
    {"fork", "knife", "Kitchen"},
    {"knife", "spoon", "Kitchen"},
    {"spoon", "bowl", "Kitchen"},
    {"bowl", "bottle", "Kitchen"},
    {"banana", "apple", "Food"},
    {"apple", "orange", "Food"},
    {"sandwich", "hot dog", "Food"},
    {"orange", "banana", "Food"},
    {"broccoli", "carrot", "Food"},
    {"carrot", "hot dog", "Food"},
    {"hot dog", "pizza", "Food"},
    {"pizza", "donut", "Food"},
    {"donut", "cake", "Food"},
    {"cake", "apple", "Food"},
    {"chair", "couch", "Furniture"},
    {"couch", "potted plant", "Furniture"},
    {"potted plant", "bed", "Furniture"},
    {"bed", "dining table", "Furniture"},
    {"dining table", "toilet", "Furniture"},
    {"toilet", "chair", "Furniture"},
    {"tv", "laptop", "Electronic"},
    {"laptop", "mouse", "Electronic"},
    {"mouse", "remote", "Electronic"},
    {"remote", "keyboard", "Electronic"},
    {"keyboard", "cell phone", "Electronic"},
    {"cell phone", "tv", "Electronic"},
    {"microwave", "oven", "Appliance"},
    {"oven", "toaster", "Appliance"},
    {"toaster", "sink", "Appliance"},
    {"sink", "refrigerator", "Appliance"},
    {"refrigerator", "microwave", "Appliance"},
    {"book", "clock", "Indoor"},
    {"clock", "vase", "Indoor"},
    {"vase", "scissors", "Indoor"},
    {"scissors", "teddy bear", "Indoor"},
    {"teddy bear", "hair drier", "Indoor"},
    {"hair drier", "toothbrush", "Indoor"},
    {"toothbrush", "book", "Indoor"},
}};

const std::map<std::string, int>& expected_counts() {
    static const std::map<std::string, int> counts{
        {"Vehicle", 8}, {"Outdoor", 5},    {"Animal", 10},     {"Accessory", 5}, {"Sports", 10}, {"Kitchen", 7},
        {"Food", 10},   {"Furniture", 6}, {"Electronic", 6}, {"Appliance", 5}, {"Indoor", 7},
    };
    return counts;
}

}  // namespace

std::vector<ChangePair> load_change_pairs() {
    std::vector<ChangePair> pairs;
    pairs.reserve(kPairs.size());
    std::map<std::string, int> counts;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& row : kPairs) {
        ChangePair p{row.source, row.target, row.supercategory};
        if (p.source == p.target) throw BenchmarkError("change-pair bundle: " + p.source + " maps to itself");
        if (!seen.insert({p.source, p.target}).second) {
            throw BenchmarkError("change-pair bundle: duplicate pair " + p.source + " -> " + p.target);
        }
        ++counts[p.supercategory];
        pairs.push_back(std::move(p));
    }
    if (pairs.size() != 79 || counts != expected_counts()) {
        throw BenchmarkError("change-pair bundle: row or per-supercategory counts are corrupted");
    }
    return pairs;
}

std::vector<CategoryInfo> categories_from_pairs(const std::vector<ChangePair>& pairs) {
    std::vector<CategoryInfo> out;
    std::set<std::string> seen;
    for (const auto& p : pairs) {
        if (seen.insert(p.source).second) out.push_back({p.source, p.supercategory});
    }
    for (const auto& p : pairs) {
        if (seen.insert(p.target).second) out.push_back({p.target, p.supercategory});
    }
    return out;
}

std::vector<std::string> supercategories(const std::vector<ChangePair>& pairs) {
    std::vector<std::string> out;
    for (const auto& p : pairs) {
        if (std::find(out.begin(), out.end(), p.supercategory) == out.end()) out.push_back(p.supercategory);
    }
    return out;
}

std::vector<CategoryInfo> benchmark_categories() {
    static const std::vector<CategoryInfo> cats = categories_from_pairs(load_change_pairs());
    return cats;
}

std::vector<ChangePair> parse_change_pairs(const nlohmann::json& j, const std::vector<CategoryInfo>& categories) {
    if (!j.is_array() || j.empty()) throw BenchmarkError("pairs file: expected a non-empty JSON array");
    auto known = [&](const std::string& name) {
        return std::any_of(categories.begin(), categories.end(), [&](const auto& c) { return c.name == name; });
    };
    std::vector<ChangePair> out;
    for (const auto& e : j) {
        ChangePair p;
        try {
            p.source = e.at("source").get<std::string>();
            p.target = e.at("target").get<std::string>();
            p.supercategory = e.value("supercategory", std::string("Custom"));
        } catch (const nlohmann::json::exception& ex) {
            throw BenchmarkError(std::string("pairs file: ") + ex.what());
        }
        if (p.source == p.target) throw BenchmarkError("pairs file: " + p.source + " maps to itself");
        if (!known(p.source) || !known(p.target)) {
            throw BenchmarkError("pairs file: unknown category in " + p.source + " -> " + p.target);
        }
        out.push_back(std::move(p));
    }
    return out;
}

const ChangePair* find_pair(const std::vector<ChangePair>& pairs, const std::string& source, const std::string& target) {
    for (const auto& p : pairs) {
        if (p.source == source && p.target == target) return &p;
    }
    return nullptr;
}

void GeneratorConfig::validate() const {
    model.validate();
    if (!(source_width > 0.0 && source_height > 0.0)) throw BenchmarkError("generator: source size must be positive");
    if (!(noise_sigma >= 0.0)) throw BenchmarkError("generator: noise sigma must be >= 0");
    if (!(background_max >= 0.0 && background_max <= 1.0)) throw BenchmarkError("generator: background_max in [0,1]");
    if (min_distractors < 0 || max_distractors < min_distractors || max_distractors > 4) {
        throw BenchmarkError("generator: distractor range must satisfy 0 <= min <= max <= 4");
    }
    if (!(min_area_fraction > 0.0 && min_area_fraction <= max_area_fraction && max_area_fraction <= 1.0)) {
        throw BenchmarkError("generator: invalid area-fraction range");
    }
    if (max_placement_attempts < 1) throw BenchmarkError("generator: max_placement_attempts must be >= 1");
}

nlohmann::ordered_json to_json(const GeneratorConfig& cfg) {
    nlohmann::ordered_json j;
    j["model"] = to_json(cfg.model);
    j["source_width"] = cfg.source_width;
    j["source_height"] = cfg.source_height;
    j["noise_sigma"] = cfg.noise_sigma;
    j["background_max"] = cfg.background_max;
    j["distractors"] = {cfg.min_distractors, cfg.max_distractors};
    j["area_fraction"] = {cfg.min_area_fraction, cfg.max_area_fraction};
    j["max_placement_attempts"] = cfg.max_placement_attempts;
    j["master_seed"] = cfg.master_seed;
    return j;
}

GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
    GeneratorConfig cfg;
    try {
        cfg.model = model_config_from_json(j.at("model"));
        cfg.source_width = j.at("source_width").get<double>();
        cfg.source_height = j.at("source_height").get<double>();
        cfg.noise_sigma = j.at("noise_sigma").get<double>();
        cfg.background_max = j.at("background_max").get<double>();
        cfg.min_distractors = j.at("distractors").at(0).get<int>();
        cfg.max_distractors = j.at("distractors").at(1).get<int>();
        cfg.min_area_fraction = j.at("area_fraction").at(0).get<double>();
        cfg.max_area_fraction = j.at("area_fraction").at(1).get<double>();
        cfg.max_placement_attempts = j.value("max_placement_attempts", cfg.max_placement_attempts);
        cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw BenchmarkError(std::string("generator config json: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

namespace {

bool overlaps(const TokenRect& a, const TokenRect& b) {
    return a.i_min < b.i_max && b.i_min < a.i_max && a.j_min < b.j_max && b.j_min < a.j_max;
}

void paint_tile(Image& img, const TokenRect& rect, std::span<const double> tile, int patch, double sigma, Rng& rng) {
    const int c = img.channels();
    for (int j = rect.j_min; j < rect.j_max; ++j) {
        for (int i = rect.i_min; i < rect.i_max; ++i) {
            for (int py = 0; py < patch; ++py) {
                for (int px = 0; px < patch; ++px) {
                    for (int ch = 0; ch < c; ++ch) {
                        double v = tile[(static_cast<std::size_t>(py) * patch + px) * c + ch];
                        if (sigma > 0.0) v += sigma * rng.normal();
                        img.at(j * patch + py, i * patch + px, ch) =
                            static_cast<double>(static_cast<float>(std::clamp(v, 0.0, 1.0)));
                    }
                }
            }
        }
    }
}

std::string fmt_seed(std::uint64_t seed) { return std::to_string(seed); }

}  // namespace

Scene synthesize_scene(const ChangePair& pair, const Model& model, const GeneratorConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const auto& table = model.categories();
    const int source = table.require(pair.source);
    const int target = table.require(pair.target);
    if (source == target) throw BenchmarkError("synthesize_scene: source equals target");

    const ModelConfig& mc = model.config();
    const int cols = mc.grid_cols();
    const int rows = mc.grid_rows();
    const double cells = static_cast<double>(cols) * rows;
    Rng rng(seed);

    Image img(mc.canonical_height, mc.canonical_width, mc.channels);
    for (double& v : img.pixels()) v = static_cast<double>(static_cast<float>(cfg.background_max * rng.uniform()));

    // Patch-aligned boxes: area fraction is (w*h)/(cols*rows).
    std::vector<std::pair<int, int>> sizes;
    for (int h = 1; h <= rows; ++h) {
        for (int w = 1; w <= cols; ++w) {
            const double frac = w * h / cells;
            if (frac >= cfg.min_area_fraction && frac <= cfg.max_area_fraction) sizes.emplace_back(w, h);
        }
    }
    if (sizes.empty()) {
        throw BenchmarkError("synthesize_scene: no patch-aligned box satisfies the area range (seed " + fmt_seed(seed) +
                             ")");
    }
    const auto [sw, sh] = sizes[static_cast<std::size_t>(rng.integer(0, static_cast<int>(sizes.size()) - 1))];
    const int si = rng.integer(0, cols - sw);
    const int sj = rng.integer(0, rows - sh);
    const TokenRect src_rect{si, si + sw, sj, sj + sh};
    paint_tile(img, src_rect, table.tile(source), mc.patch, cfg.noise_sigma, rng);

    std::vector<TokenRect> placed{src_rect};
    std::vector<std::string> painted{pair.source};
    std::vector<int> pool;
    for (int c = 0; c < table.size(); ++c) {
        if (c != source && c != target) pool.push_back(c);
    }
    const int n_distractors = rng.integer(cfg.min_distractors, cfg.max_distractors);
    for (int d = 0; d < n_distractors && !pool.empty(); ++d) {
        const auto pick = static_cast<std::size_t>(rng.integer(0, static_cast<int>(pool.size()) - 1));
        const int cat = pool[pick];
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));

        bool ok = false;
        for (int attempt = 0; attempt < cfg.max_placement_attempts && !ok; ++attempt) {
            const int w = rng.integer(1, std::min(3, cols));
            const int h = rng.integer(1, std::min(3, rows));
            const int i = rng.integer(0, cols - w);
            const int j = rng.integer(0, rows - h);
            const TokenRect r{i, i + w, j, j + h};
            if (std::none_of(placed.begin(), placed.end(), [&](const TokenRect& p) { return overlaps(p, r); })) {
                paint_tile(img, r, table.tile(cat), mc.patch, cfg.noise_sigma, rng);
                placed.push_back(r);
                painted.push_back(table.at(cat).name);
                ok = true;
            }
        }
        if (!ok) {
            throw BenchmarkError("synthesize_scene: could not place distractor without overlap (seed " + fmt_seed(seed) +
                                 ")");
        }
    }

    const GridGeometry g = model.geometry(cfg.source_width, cfg.source_height);
    Scene scene;
    scene.image = std::move(img);
    scene.sample.width = cfg.source_width;
    scene.sample.height = cfg.source_height;
    scene.sample.bbox = tokens_to_box(src_rect, g);
    scene.sample.source = pair.source;
    scene.sample.target = pair.target;
    scene.sample.caption_categories = std::move(painted);
    scene.sample.seed = seed;
    return scene;
}

namespace {

constexpr double kTileMatch = 0.6;

double centered_correlation(std::span<const double> a, std::span<const double> b) {
    const auto n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        ma += a[k];
        mb += b[k];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        sab += (a[k] - ma) * (b[k] - mb);
        saa += (a[k] - ma) * (a[k] - ma);
        sbb += (b[k] - mb) * (b[k] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

// Category painted at every token (-1 for background), by best tile correlation.
std::vector<int> label_tokens(const Image& img, const Model& model) {
    const ModelConfig& mc = model.config();
    const int cols = mc.grid_cols();
    const int rows = mc.grid_rows();
    const int c = img.channels();
    std::vector<int> labels(static_cast<std::size_t>(rows) * cols, -1);
    std::vector<double> patch(static_cast<std::size_t>(mc.patch_dim()));
    for (int j = 0; j < rows; ++j) {
        for (int i = 0; i < cols; ++i) {
            std::size_t k = 0;
            for (int py = 0; py < mc.patch; ++py) {
                for (int px = 0; px < mc.patch; ++px) {
                    for (int ch = 0; ch < c; ++ch) patch[k++] = img.at(j * mc.patch + py, i * mc.patch + px, ch);
                }
            }
            double best = kTileMatch;
            for (int cat = 0; cat < model.categories().size(); ++cat) {
                const double r = centered_correlation(patch, model.categories().tile(cat));
                if (r >= best) {
                    best = r;
                    labels[static_cast<std::size_t>(j) * cols + i] = cat;
                }
            }
        }
    }
    return labels;
}

}  // namespace

std::vector<std::string> validate_sample(const Sample& s, const Image& img, const Model& model,
                                         const GeneratorConfig& cfg) {
    std::vector<std::string> v;
    auto add = [&](const char* rule) {
        if (std::find(v.begin(), v.end(), rule) == v.end()) v.emplace_back(rule);
    };
    const auto& table = model.categories();
    const auto source = table.find(s.source);
    const auto target = table.find(s.target);
    if (!source || !target) add("unknown-category");
    if (s.source == s.target) add("source-equals-target");

    const ModelConfig& mc = model.config();
    if (img.height() != mc.canonical_height || img.width() != mc.canonical_width || img.channels() != mc.channels) {
        add("image-size");
        return v;
    }
    if (!img.in_unit_range()) add("pixel-range");

    const bool box_ok = s.width > 0.0 && s.height > 0.0 && s.bbox.within(s.width, s.height);
    if (!box_ok) {
        add("bbox-out-of-bounds");
    } else {
        const double frac = s.bbox.area() / (s.width * s.height);
        if (frac < cfg.min_area_fraction - 1e-12 || frac > cfg.max_area_fraction + 1e-12) add("area-fraction");
    }

    std::set<std::string> caption_set;
    for (const auto& name : s.caption_categories) {
        if (!caption_set.insert(name).second) add("duplicate-category");
        if (!table.find(name)) add("unknown-category");
    }
    if (!caption_set.count(s.source)) add("caption-mismatch");

    const std::vector<int> labels = label_tokens(img, model);
    const int cols = mc.grid_cols();
    const int rows = mc.grid_rows();

    std::map<int, int> instances;
    int total_instances = 0;
    std::set<int> all_labels(labels.begin(), labels.end());
    all_labels.erase(-1);
    for (int cat : all_labels) {
        BoolGrid mask(rows, cols);
        for (std::size_t k = 0; k < labels.size(); ++k) mask.cells[k] = labels[k] == cat ? 1 : 0;
        const int n = static_cast<int>(connected_components(mask).size());
        instances[cat] = n;
        total_instances += n;
    }
    if (total_instances > 5) add("too-many-instances");
    if (std::any_of(instances.begin(), instances.end(), [](const auto& kv) { return kv.second > 1; })) {
        add("duplicate-category");
    }
    if (target && instances.count(*target)) add("target-present");

    std::set<std::string> found;
    for (const auto& [cat, n] : instances) {
        if (!target || cat != *target) found.insert(table.at(cat).name);
    }
    std::set<std::string> expected = caption_set;
    if (target) expected.erase(s.target);
    if (found != expected) add("caption-mismatch");

    if (box_ok && source) {
        const TokenRect r = box_to_tokens(s.bbox, model.geometry(s.width, s.height));
        int hits = 0;
        for (int j = r.j_min; j < r.j_max; ++j) {
            for (int i = r.i_min; i < r.i_max; ++i) hits += labels[static_cast<std::size_t>(j) * cols + i] == *source;
        }
        if (2 * hits <= r.cell_count()) add("source-absent");
    }
    return v;
}

Dataset generate_dataset(int n_per_pair, const GeneratorConfig& cfg, const std::vector<ChangePair>& pairs, int jobs) {
    if (n_per_pair < 1) throw BenchmarkError("generate_dataset: n_per_pair must be >= 1");
    cfg.validate();
    Dataset ds;
    ds.generator = cfg;
    ds.n_per_pair = n_per_pair;
    ds.pairs = pairs;
    if (pairs != load_change_pairs()) {
        nlohmann::ordered_json pj = nlohmann::ordered_json::array();
        for (const auto& p : pairs) pj.push_back({{"source", p.source}, {"target", p.target}, {"supercategory", p.supercategory}});
        char buf[32];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(pj.dump())));
        ds.change_pair_version = std::string("custom/") + buf;
    }
    const Model model = dataset_model(ds);

    const std::size_t total = pairs.size() * static_cast<std::size_t>(n_per_pair);
    ds.samples.resize(total);
    ds.images.resize(total);
    parallel_for(total, jobs, [&](std::size_t idx) {
        const std::size_t p = idx / static_cast<std::size_t>(n_per_pair);
        const std::size_t k = idx % static_cast<std::size_t>(n_per_pair);
        const std::uint64_t seed = derive_seed(cfg.master_seed, p, k);
        Scene scene = synthesize_scene(pairs[p], model, cfg, seed);
        char id[32];
        std::snprintf(id, sizeof id, "s%03zu_%zu", p, k);
        scene.sample.id = id;
        scene.sample.image_path = std::string("images/") + id + ".cvf";
        ds.samples[idx] = std::move(scene.sample);
        ds.images[idx] = std::move(scene.image);
    });
    return ds;
}

Model dataset_model(const Dataset& ds) { return Model::build(ds.generator.model, benchmark_categories()); }

std::string dataset_json(const Dataset& ds) {
    nlohmann::ordered_json j;
    auto gen = to_json(ds.generator);
    gen["n_per_pair"] = ds.n_per_pair;
    j["generator_config"] = gen;
    j["change_pair_version"] = ds.change_pair_version;
    if (ds.change_pair_version != kChangePairVersion) {
        auto& pj = j["change_pairs"] = nlohmann::ordered_json::array();
        for (const auto& p : ds.pairs) pj.push_back({{"source", p.source}, {"target", p.target}, {"supercategory", p.supercategory}});
    }
    auto& samples = j["samples"] = nlohmann::ordered_json::array();
    for (const auto& s : ds.samples) {
        samples.push_back({{"id", s.id},
                           {"image_path", s.image_path},
                           {"width", s.width},
                           {"height", s.height},
                           {"bbox", {s.bbox.x1, s.bbox.y1, s.bbox.x2, s.bbox.y2}},
                           {"source", s.source},
                           {"target", s.target},
                           {"caption_categories", s.caption_categories},
                           {"seed", s.seed}});
    }
    return j.dump(2) + "\n";
}

std::filesystem::path dataset_json_path(const std::filesystem::path& path) {
    return std::filesystem::is_directory(path) ? path / "dataset.json" : path;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
    if (ds.images.size() != ds.samples.size()) throw BenchmarkError("write_dataset: images missing");
    std::filesystem::create_directories(dir / "images");
    for (std::size_t k = 0; k < ds.samples.size(); ++k) {
        const auto cvf = dir / ds.samples[k].image_path;
        write_cvf(cvf, ds.images[k]);
        auto ppm = cvf;
        ppm.replace_extension(".ppm");
        write_ppm(ppm, ds.images[k]);
    }
    write_file_atomic(dir / "dataset.json", dataset_json(ds));
}

Dataset read_dataset(const std::filesystem::path& path) {
    const auto json_path = dataset_json_path(path);
    const auto dir = json_path.parent_path();
    Dataset ds;
    try {
        const auto j = nlohmann::json::parse(read_file(json_path));
        const auto& gen = j.at("generator_config");
        ds.generator = generator_config_from_json(gen);
        ds.n_per_pair = gen.value("n_per_pair", 0);
        ds.change_pair_version = j.at("change_pair_version").get<std::string>();
        if (ds.change_pair_version == kChangePairVersion) {
            ds.pairs = load_change_pairs();
        } else {
            ds.pairs = parse_change_pairs(j.at("change_pairs"), benchmark_categories());
        }
        std::set<std::string> ids;
        for (const auto& e : j.at("samples")) {
            Sample s;
            s.id = e.at("id").get<std::string>();
            s.image_path = e.at("image_path").get<std::string>();
            s.width = e.at("width").get<double>();
            s.height = e.at("height").get<double>();
            const auto& b = e.at("bbox");
            s.bbox = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
            s.source = e.at("source").get<std::string>();
            s.target = e.at("target").get<std::string>();
            s.caption_categories = e.at("caption_categories").get<std::vector<std::string>>();
            s.seed = e.at("seed").get<std::uint64_t>();
            if (!ids.insert(s.id).second) throw BenchmarkError("dataset: duplicate sample id " + s.id);
            ds.samples.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw BenchmarkError(json_path.string() + ": " + e.what());
    }
    ds.images.reserve(ds.samples.size());
    for (const auto& s : ds.samples) ds.images.push_back(read_cvf(dir / s.image_path));
    return ds;
}

}  // namespace craft
