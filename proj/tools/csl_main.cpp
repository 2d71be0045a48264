// Command-line front door: select / mask / eval / compare / synth / loss,
// plus rerun, which replays any of them from a recorded manifest. All
// subcommands compute first and write last, so a failure exit leaves no
// output files behind.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "csl/errors.hpp"
#include "csl/evaluation.hpp"
#include "csl/features.hpp"
#include "csl/losses.hpp"
#include "csl/npy.hpp"
#include "csl/perturbation.hpp"
#include "csl/separation.hpp"
#include "csl/synthgen.hpp"
#include "csl/version.hpp"

namespace {

using json = nlohmann::json;

/// Records files written during one invocation so a late failure can remove
/// everything the run produced.
class OutputTracker {
public:
    void write(const std::string& path, const csl::Tensor& t) {
        csl::npy::write_array(path, t);
        written_.push_back(path);
    }

    void write_text(const std::string& path, const std::string& text) {
        const std::string tmp = path + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) {
                throw csl::IoError("cannot open '" + tmp + "' for writing");
            }
            out << text;
            out.flush();
            if (!out) {
                std::remove(tmp.c_str());
                throw csl::IoError("write failed on '" + tmp + "'");
            }
        }
        std::error_code ec;
        std::filesystem::rename(tmp, path, ec);
        if (ec) {
            std::remove(tmp.c_str());
            throw csl::IoError("cannot move '" + tmp + "' to '" + path +
                               "': " + ec.message());
        }
        written_.push_back(path);
    }

    void discard_all() {
        for (const std::string& path : written_) std::remove(path.c_str());
        written_.clear();
    }

private:
    std::vector<std::string> written_;
};

std::string absolute_path(const std::string& path) {
    return std::filesystem::absolute(path).string();
}

uint64_t resolve_seed(bool seed_given, uint64_t flag_value) {
    if (seed_given) return flag_value;
    if (const char* env = std::getenv("CSL_SEED")) {
        try {
            size_t used = 0;
            const uint64_t v = std::stoull(env, &used);
            if (used != std::string(env).size()) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw std::invalid_argument(
                "CSL_SEED must be an unsigned integer, got '" +
                std::string(env) + "'");
        }
    }
    return 0;
}

csl::LabelMap label_map_from_file(const std::string& path,
                                  int32_t ignore_index) {
    return csl::LabelMap::from_tensor(csl::npy::read_array(path), ignore_index);
}

/// Weight map file -> minimal selection view (hard = weight exactly 1).
csl::SelectionOutcome selection_from_weights(const std::string& path) {
    const csl::Tensor t = csl::npy::read_array(path);
    if (t.ndim() != 2) {
        throw std::invalid_argument("weight map must be 2-D");
    }
    csl::SelectionOutcome sel;
    sel.height = t.shape()[0];
    sel.width = t.shape()[1];
    sel.weights = t.as_f64();
    sel.hard_mask.resize(sel.weights.size());
    sel.assignment.resize(sel.weights.size());
    sel.reliable_class = 1;
    for (size_t i = 0; i < sel.weights.size(); ++i) {
        if (!(sel.weights[i] >= 0.0 && sel.weights[i] <= 1.0)) {
            throw std::invalid_argument("weight map values must lie in [0, 1]");
        }
        sel.hard_mask[i] = sel.weights[i] == 1.0 ? 1 : 0;
        sel.assignment[i] = sel.hard_mask[i];
    }
    return sel;
}

void write_manifest(OutputTracker& tracker, const std::string& path,
                    const std::string& subcommand, json parameters,
                    json inputs, json outputs, json seed, double wall_ms) {
    if (path.empty()) return;
    const json manifest = {
        {"schema", "csl-manifest/1"},
        {"tool_version", csl::kVersion},
        {"subcommand", subcommand},
        {"parameters", std::move(parameters)},
        {"inputs", std::move(inputs)},
        {"outputs", std::move(outputs)},
        {"seed", std::move(seed)},
        {"wall_time_ms", wall_ms},
    };
    tracker.write_text(path, manifest.dump(2) + "\n");
}

class Stopwatch {
public:
    double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(
                   std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_ =
        std::chrono::steady_clock::now();
};

// ---------------------------------------------------------------- select --

struct SelectArgs {
    std::string probs;
    double alpha = 8.0;
    std::string metric = "residual-dispersion";
    std::string hard_rule = "and";
    bool normalize = false;
    bool class_specific = false;
    std::string out_weights;
    std::string out_labels;
    std::string manifest;
};

void run_select(const SelectArgs& args, OutputTracker& tracker) {
    Stopwatch clock;
    csl::SeparationConfig cfg;
    cfg.alpha = args.alpha;
    cfg.metric = csl::metric_from_name(args.metric);
    cfg.hard_rule = csl::hard_rule_from_name(args.hard_rule);
    cfg.normalize = args.normalize;
    cfg.class_specific = args.class_specific;

    const csl::ProbabilityMap p =
        csl::ProbabilityMap::from_tensor(csl::npy::read_array(args.probs));
    const csl::SelectionOutcome sel = csl::select(p, cfg);
    if (sel.fallback_used) {
        std::cerr << "warning: degenerate features, fallback split used\n";
    }
    auto [pmax, labels] = csl::max_confidence(p);

    tracker.write(args.out_weights,
                  csl::Tensor::from_f64({sel.height, sel.width},
                                        csl::Dtype::Float64, sel.weights));
    tracker.write(args.out_labels, labels.to_tensor());
    write_manifest(tracker, args.manifest, "select",
                   {{"alpha", args.alpha},
                    {"metric", args.metric},
                    {"hard_rule", args.hard_rule},
                    {"normalize", args.normalize},
                    {"class_specific", args.class_specific}},
                   {{"probs", absolute_path(args.probs)}},
                   {{"weights", absolute_path(args.out_weights)},
                    {"labels", absolute_path(args.out_labels)}},
                   nullptr, clock.elapsed_ms());
}

// ------------------------------------------------------------------ mask --

struct MaskArgs {
    std::string weights;
    std::string image;
    size_t patch_size = 32;
    double ratio = 0.7;
    uint64_t seed = 0;
    std::string out_image;
    std::string out_mask;
    std::string manifest;
};

void run_mask(const MaskArgs& args, OutputTracker& tracker) {
    Stopwatch clock;
    const csl::SelectionOutcome sel = selection_from_weights(args.weights);
    const csl::Tensor image = csl::npy::read_array(args.image);
    const csl::PerturbationMask mask =
        csl::make_mask(sel, args.patch_size, args.ratio, args.seed);
    const csl::Tensor perturbed = csl::apply_mask(image, mask);

    csl::Tensor mask_t =
        csl::Tensor::zeros({mask.height, mask.width}, csl::Dtype::Uint8);
    auto mv = mask_t.view<uint8_t>();
    std::copy(mask.zero_out.begin(), mask.zero_out.end(), mv.begin());

    tracker.write(args.out_image, perturbed);
    tracker.write(args.out_mask, mask_t);
    write_manifest(tracker, args.manifest, "mask",
                   {{"patch_size", args.patch_size}, {"ratio", args.ratio}},
                   {{"weights", absolute_path(args.weights)},
                    {"image", absolute_path(args.image)}},
                   {{"image", absolute_path(args.out_image)},
                    {"mask", absolute_path(args.out_mask)}},
                   args.seed, clock.elapsed_ms());
}

// ------------------------------------------------------------------ eval --

struct EvalArgs {
    std::string weights;
    std::string pred_labels;
    std::string gt;
    int32_t ignore_index = 255;
    std::string manifest;
};

void run_eval(const EvalArgs& args, OutputTracker& tracker) {
    Stopwatch clock;
    const csl::SelectionOutcome sel = selection_from_weights(args.weights);
    const csl::LabelMap pred =
        label_map_from_file(args.pred_labels, args.ignore_index);
    const csl::LabelMap gt = label_map_from_file(args.gt, args.ignore_index);
    const csl::QualityReport report = csl::score(sel, pred, gt);
    const std::string rendered = csl::to_json(report) + "\n";
    write_manifest(tracker, args.manifest, "eval",
                   {{"ignore_index", args.ignore_index}},
                   {{"weights", absolute_path(args.weights)},
                    {"pred_labels", absolute_path(args.pred_labels)},
                    {"gt", absolute_path(args.gt)}},
                   json::object(), nullptr, clock.elapsed_ms());
    std::cout << rendered;
}

// --------------------------------------------------------------- compare --

struct CompareArgs {
    std::string probs;
    std::string gt;
    std::vector<std::string> methods;
    int32_t ignore_index = 255;
    std::string format = "json";
    std::string manifest;
};

/// "name:kind[:param]" -> a named SelectionOutcome. kind csl takes a
/// comma-separated option list (or/and, norm, class-specific, alpha=X,
/// metric=NAME); kind threshold takes tau (default 0.95).
csl::SelectionOutcome method_outcome(const std::string& kind,
                                     const std::string& param,
                                     const csl::ProbabilityMap& p) {
    if (kind == "threshold") {
        double tau = 0.95;
        if (!param.empty()) tau = std::stod(param);
        return csl::threshold_baseline(p, tau);
    }
    if (kind == "csl") {
        csl::SeparationConfig cfg;
        std::string rest = param;
        while (!rest.empty()) {
            const size_t comma = rest.find(',');
            const std::string token = rest.substr(0, comma);
            rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
            if (token.empty()) continue;
            if (token == "norm") {
                cfg.normalize = true;
            } else if (token == "raw") {
                cfg.normalize = false;
            } else if (token == "or" || token == "and") {
                cfg.hard_rule = csl::hard_rule_from_name(token);
            } else if (token == "class-specific") {
                cfg.class_specific = true;
            } else if (token.rfind("alpha=", 0) == 0) {
                cfg.alpha = std::stod(token.substr(6));
            } else if (token.rfind("metric=", 0) == 0) {
                cfg.metric = csl::metric_from_name(token.substr(7));
            } else {
                throw std::invalid_argument("unknown csl method option '" +
                                            token + "'");
            }
        }
        return csl::select(p, cfg);
    }
    throw std::invalid_argument("unknown method kind '" + kind +
                                "' (csl or threshold)");
}

void run_compare(const CompareArgs& args, OutputTracker& tracker) {
    Stopwatch clock;
    if (args.methods.empty()) {
        throw std::invalid_argument("compare needs at least one --method");
    }
    if (args.format != "json" && args.format != "text") {
        throw std::invalid_argument("format must be json or text");
    }
    const csl::ProbabilityMap p =
        csl::ProbabilityMap::from_tensor(csl::npy::read_array(args.probs));
    csl::LabelMap gt = label_map_from_file(args.gt, args.ignore_index);
    auto [pmax, pred] = csl::max_confidence(p);
    pred.ignore_index = args.ignore_index;

    std::vector<std::pair<std::string, csl::SelectionOutcome>> methods;
    for (const std::string& spec : args.methods) {
        const size_t c1 = spec.find(':');
        if (c1 == std::string::npos) {
            throw std::invalid_argument("method '" + spec +
                                        "' is not name:kind[:param]");
        }
        const size_t c2 = spec.find(':', c1 + 1);
        const std::string name = spec.substr(0, c1);
        const std::string kind =
            spec.substr(c1 + 1, c2 == std::string::npos ? std::string::npos
                                                        : c2 - c1 - 1);
        const std::string param =
            c2 == std::string::npos ? "" : spec.substr(c2 + 1);
        methods.emplace_back(name, method_outcome(kind, param, p));
    }

    const csl::ComparisonTable table = csl::compare(methods, pred, gt);
    const std::string rendered =
        args.format == "json" ? csl::to_json(table) + "\n"
                              : csl::to_text(table);
    write_manifest(tracker, args.manifest, "compare",
                   {{"methods", args.methods},
                    {"ignore_index", args.ignore_index},
                    {"format", args.format}},
                   {{"probs", absolute_path(args.probs)},
                    {"gt", absolute_path(args.gt)}},
                   json::object(), nullptr, clock.elapsed_ms());
    std::cout << rendered;
}

// ----------------------------------------------------------------- synth --

struct SynthArgs {
    size_t height = 128;
    size_t width = 128;
    size_t classes = 8;
    double error_rate = 0.2;
    double temperature = 0.25;
    double confusion_mass = 0.6;
    size_t region_seeds = 40;
    uint64_t seed = 0;
    std::string dtype = "float32";
    std::string out_probs;
    std::string out_gt;
    std::string out_correctness;
    std::string manifest;
};

void run_synth(const SynthArgs& args, OutputTracker& tracker) {
    Stopwatch clock;
    csl::SynthConfig cfg;
    cfg.height = args.height;
    cfg.width = args.width;
    cfg.classes = args.classes;
    cfg.error_rate = args.error_rate;
    cfg.temperature = args.temperature;
    cfg.confusion_mass = args.confusion_mass;
    cfg.region_seeds = args.region_seeds;
    cfg.seed = args.seed;

    csl::Dtype dtype;
    if (args.dtype == "float32") {
        dtype = csl::Dtype::Float32;
    } else if (args.dtype == "float64") {
        dtype = csl::Dtype::Float64;
    } else {
        throw std::invalid_argument("dtype must be float32 or float64");
    }

    const csl::SynthResult result = csl::generate(cfg);
    tracker.write(args.out_probs, result.probs.to_tensor(dtype));
    tracker.write(args.out_gt, result.gt.to_tensor());
    if (!args.out_correctness.empty()) {
        csl::Tensor c =
            csl::Tensor::zeros({cfg.height, cfg.width}, csl::Dtype::Uint8);
        auto cv = c.view<uint8_t>();
        std::copy(result.correctness.begin(), result.correctness.end(),
                  cv.begin());
        tracker.write(args.out_correctness, c);
    }
    json outputs = {{"probs", absolute_path(args.out_probs)},
                    {"gt", absolute_path(args.out_gt)}};
    if (!args.out_correctness.empty()) {
        outputs["correctness"] = absolute_path(args.out_correctness);
    }
    write_manifest(tracker, args.manifest, "synth",
                   {{"height", args.height},
                    {"width", args.width},
                    {"classes", args.classes},
                    {"error_rate", args.error_rate},
                    {"temperature", args.temperature},
                    {"confusion_mass", args.confusion_mass},
                    {"region_seeds", args.region_seeds},
                    {"dtype", args.dtype}},
                   json::object(), std::move(outputs), args.seed,
                   clock.elapsed_ms());
}

// ------------------------------------------------------------------ loss --

struct LossArgs {
    std::string probs;
    std::string target;
    std::string weights;
    std::string masked_probs;
    double lambda1 = 0.5;
    double lambda2 = 0.5;
    std::string norm = "all-pixels";
    int32_t ignore_index = 255;
    std::string manifest;
};

void run_loss(const LossArgs& args, OutputTracker& tracker) {
    Stopwatch clock;
    const csl::PixelNorm norm = csl::pixel_norm_from_name(args.norm);
    const csl::ProbabilityMap probs =
        csl::ProbabilityMap::from_tensor(csl::npy::read_array(args.probs));
    const csl::LabelMap target =
        label_map_from_file(args.target, args.ignore_index);
    const csl::Tensor weights_t = csl::npy::read_array(args.weights);
    const std::vector<double> weights = weights_t.as_f64();

    const double l_a = csl::weighted_ce(probs, target, weights, norm);
    double value = l_a;
    if (!args.masked_probs.empty()) {
        const csl::ProbabilityMap masked = csl::ProbabilityMap::from_tensor(
            csl::npy::read_array(args.masked_probs));
        const double l_m = csl::weighted_ce(masked, target, weights, norm);
        value = csl::combined_unsupervised(l_a, l_m, args.lambda1,
                                           args.lambda2);
    }

    json inputs = {{"probs", absolute_path(args.probs)},
                   {"target", absolute_path(args.target)},
                   {"weights", absolute_path(args.weights)}};
    if (!args.masked_probs.empty()) {
        inputs["masked_probs"] = absolute_path(args.masked_probs);
    }
    write_manifest(tracker, args.manifest, "loss",
                   {{"lambda1", args.lambda1},
                    {"lambda2", args.lambda2},
                    {"norm", args.norm},
                    {"ignore_index", args.ignore_index}},
                   std::move(inputs), json::object(), nullptr,
                   clock.elapsed_ms());
    std::cout << json(value).dump() << "\n";
}

// ----------------------------------------------------------------- rerun --

void run_rerun(const std::string& manifest_path, OutputTracker& tracker) {
    std::ifstream in(manifest_path);
    if (!in) {
        throw csl::IoError("cannot open manifest '" + manifest_path + "'");
    }
    json m;
    in >> m;
    if (m.value("schema", "") != "csl-manifest/1") {
        throw csl::FormatError("manifest schema is not csl-manifest/1");
    }
    const std::string sub = m.at("subcommand").get<std::string>();
    const json& prm = m.at("parameters");
    const json& inputs = m.at("inputs");
    const json& outputs = m.at("outputs");

    if (sub == "select") {
        SelectArgs a;
        a.probs = inputs.at("probs");
        a.alpha = prm.at("alpha");
        a.metric = prm.at("metric");
        a.hard_rule = prm.at("hard_rule");
        a.normalize = prm.at("normalize");
        a.class_specific = prm.at("class_specific");
        a.out_weights = outputs.at("weights");
        a.out_labels = outputs.at("labels");
        run_select(a, tracker);
    } else if (sub == "mask") {
        MaskArgs a;
        a.weights = inputs.at("weights");
        a.image = inputs.at("image");
        a.patch_size = prm.at("patch_size");
        a.ratio = prm.at("ratio");
        a.seed = m.at("seed");
        a.out_image = outputs.at("image");
        a.out_mask = outputs.at("mask");
        run_mask(a, tracker);
    } else if (sub == "eval") {
        EvalArgs a;
        a.weights = inputs.at("weights");
        a.pred_labels = inputs.at("pred_labels");
        a.gt = inputs.at("gt");
        a.ignore_index = prm.at("ignore_index");
        run_eval(a, tracker);
    } else if (sub == "compare") {
        CompareArgs a;
        a.probs = inputs.at("probs");
        a.gt = inputs.at("gt");
        a.methods = prm.at("methods").get<std::vector<std::string>>();
        a.ignore_index = prm.at("ignore_index");
        a.format = prm.at("format");
        run_compare(a, tracker);
    } else if (sub == "synth") {
        SynthArgs a;
        a.height = prm.at("height");
        a.width = prm.at("width");
        a.classes = prm.at("classes");
        a.error_rate = prm.at("error_rate");
        a.temperature = prm.at("temperature");
        a.confusion_mass = prm.at("confusion_mass");
        a.region_seeds = prm.at("region_seeds");
        a.dtype = prm.at("dtype");
        a.seed = m.at("seed");
        a.out_probs = outputs.at("probs");
        a.out_gt = outputs.at("gt");
        if (outputs.contains("correctness")) {
            a.out_correctness = outputs.at("correctness");
        }
        run_synth(a, tracker);
    } else if (sub == "loss") {
        LossArgs a;
        a.probs = inputs.at("probs");
        a.target = inputs.at("target");
        a.weights = inputs.at("weights");
        if (inputs.contains("masked_probs")) {
            a.masked_probs = inputs.at("masked_probs");
        }
        a.lambda1 = prm.at("lambda1");
        a.lambda2 = prm.at("lambda2");
        a.norm = prm.at("norm");
        a.ignore_index = prm.at("ignore_index");
        run_loss(a, tracker);
    } else {
        throw csl::FormatError("manifest subcommand '" + sub + "' unknown");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Confidence-separable pseudo-label selection pipeline"};
    app.set_version_flag("--version", csl::kVersion);
    app.require_subcommand(1);

    SelectArgs select_args;
    CLI::App* sel = app.add_subcommand(
        "select", "Partition pixels and write a smooth weight map");
    sel->add_option("--probs", select_args.probs,
                    "Class probability map, NPY (K, H, W)")
        ->required();
    sel->add_option("--alpha", select_args.alpha,
                    "Gaussian smoothing parameter");
    sel->add_option("--metric", select_args.metric,
                    "residual-dispersion, entropy, residual-entropy, margin");
    sel->add_option("--hard-rule", select_args.hard_rule,
                    "Hard-select above the reliable means: and | or");
    sel->add_flag("--normalize", select_args.normalize,
                  "z-score each feature row before partitioning");
    sel->add_flag("--class-specific", select_args.class_specific,
                  "Partition each predicted class independently");
    sel->add_option("--out-weights", select_args.out_weights,
                    "Output weight map, NPY (H, W) float64")
        ->required();
    sel->add_option("--out-labels", select_args.out_labels,
                    "Output argmax pseudo-labels, NPY (H, W) int32")
        ->required();
    sel->add_option("--manifest", select_args.manifest,
                    "Write a rerunnable manifest JSON here");

    MaskArgs mask_args;
    CLI::App* msk = app.add_subcommand(
        "mask", "Zero random patches of the reliable region of an image");
    msk->add_option("--weights", mask_args.weights,
                    "Weight map from select, NPY (H, W)")
        ->required();
    msk->add_option("--image", mask_args.image, "Image tensor, NPY (C, H, W)")
        ->required();
    msk->add_option("--patch-size", mask_args.patch_size, "Patch size, pixels");
    msk->add_option("--ratio", mask_args.ratio, "Masked fraction in [0, 1]");
    msk->add_option("--seed", mask_args.seed, "RNG seed");
    msk->add_option("--out-image", mask_args.out_image,
                    "Output perturbed image, NPY")
        ->required();
    msk->add_option("--out-mask", mask_args.out_mask,
                    "Output zeroed-pixel mask, NPY (H, W) uint8")
        ->required();
    msk->add_option("--manifest", mask_args.manifest,
                    "Write a rerunnable manifest JSON here");

    EvalArgs eval_args;
    CLI::App* evl = app.add_subcommand(
        "eval", "Score a weight map against ground truth");
    evl->add_option("--weights", eval_args.weights, "Weight map, NPY (H, W)")
        ->required();
    evl->add_option("--pred-labels", eval_args.pred_labels,
                    "Predicted labels, NPY (H, W) int32/uint8")
        ->required();
    evl->add_option("--gt", eval_args.gt,
                    "Ground-truth labels, NPY (H, W) int32/uint8")
        ->required();
    evl->add_option("--ignore-index", eval_args.ignore_index,
                    "Ground-truth label excluded from scoring");
    evl->add_option("--manifest", eval_args.manifest,
                    "Write a rerunnable manifest JSON here");

    CompareArgs compare_args;
    CLI::App* cmp = app.add_subcommand(
        "compare", "Score several selection methods on one probability map");
    cmp->add_option("--probs", compare_args.probs,
                    "Class probability map, NPY (K, H, W)")
        ->required();
    cmp->add_option("--gt", compare_args.gt,
                    "Ground-truth labels, NPY (H, W) int32/uint8")
        ->required();
    cmp->add_option("--method", compare_args.methods,
                    "name:kind[:param], kind csl or threshold; repeatable")
        ->required();
    cmp->add_option("--ignore-index", compare_args.ignore_index,
                    "Ground-truth label excluded from scoring");
    cmp->add_option("--format", compare_args.format, "json | text");
    cmp->add_option("--manifest", compare_args.manifest,
                    "Write a rerunnable manifest JSON here");

    SynthArgs synth_args;
    CLI::App* syn = app.add_subcommand(
        "synth", "Generate a synthetic overconfident probability map");
    syn->add_option("--height", synth_args.height, "Image height");
    syn->add_option("--width", synth_args.width, "Image width");
    syn->add_option("--classes", synth_args.classes, "Class count K");
    syn->add_option("--error-rate", synth_args.error_rate,
                    "Fraction of pixels predicted wrong");
    syn->add_option("--temperature", synth_args.temperature,
                    "Softmax temperature; < 1 sharpens");
    syn->add_option("--confusion", synth_args.confusion_mass,
                    "Residual mass moved to the true class on wrong pixels");
    syn->add_option("--region-seeds", synth_args.region_seeds,
                    "Voronoi sites for the label map");
    syn->add_option("--seed", synth_args.seed, "RNG seed");
    syn->add_option("--dtype", synth_args.dtype,
                    "Probability output dtype: float32 | float64");
    syn->add_option("--out-probs", synth_args.out_probs,
                    "Output probability map, NPY (K, H, W)")
        ->required();
    syn->add_option("--out-gt", synth_args.out_gt,
                    "Output ground-truth labels, NPY (H, W) int32")
        ->required();
    syn->add_option("--out-correctness", synth_args.out_correctness,
                    "Optional per-pixel correctness, NPY (H, W) uint8");
    syn->add_option("--manifest", synth_args.manifest,
                    "Write a rerunnable manifest JSON here");

    LossArgs loss_args;
    CLI::App* los = app.add_subcommand(
        "loss", "Weighted cross-entropy of a prediction against labels");
    los->add_option("--probs", loss_args.probs,
                    "Class probability map, NPY (K, H, W)")
        ->required();
    los->add_option("--target", loss_args.target,
                    "Target labels, NPY (H, W) int32/uint8")
        ->required();
    los->add_option("--weights", loss_args.weights,
                    "Per-pixel weight map, NPY (H, W)")
        ->required();
    los->add_option("--masked-probs", loss_args.masked_probs,
                    "Probabilities on the perturbed input; enables the "
                    "lambda-weighted combination");
    los->add_option("--lambda1", loss_args.lambda1,
                    "Weight of the clean-input loss");
    los->add_option("--lambda2", loss_args.lambda2,
                    "Weight of the masked-input loss");
    los->add_option("--norm", loss_args.norm, "all-pixels | selected-mass");
    los->add_option("--ignore-index", loss_args.ignore_index,
                    "Target label excluded from the loss");
    los->add_option("--manifest", loss_args.manifest,
                    "Write a rerunnable manifest JSON here");

    std::string rerun_manifest;
    CLI::App* rrn = app.add_subcommand(
        "rerun", "Replay a subcommand from its manifest");
    rrn->add_option("--manifest", rerun_manifest, "Manifest JSON to replay")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help, --version
        app.exit(e);
        return 2;
    }

    OutputTracker tracker;
    try {
        if (sel->parsed()) {
            run_select(select_args, tracker);
        } else if (msk->parsed()) {
            mask_args.seed =
                resolve_seed(msk->count("--seed") > 0, mask_args.seed);
            run_mask(mask_args, tracker);
        } else if (evl->parsed()) {
            run_eval(eval_args, tracker);
        } else if (cmp->parsed()) {
            run_compare(compare_args, tracker);
        } else if (syn->parsed()) {
            synth_args.seed =
                resolve_seed(syn->count("--seed") > 0, synth_args.seed);
            run_synth(synth_args, tracker);
        } else if (los->parsed()) {
            run_loss(loss_args, tracker);
        } else if (rrn->parsed()) {
            run_rerun(rerun_manifest, tracker);
        }
    } catch (const csl::IoError& e) {
        tracker.discard_all();
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const nlohmann::json::exception& e) {
        tracker.discard_all();
        std::cerr << "error: manifest: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        tracker.discard_all();
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
