// indt: command-line front end for the inspection pipeline.
//
//   phantom   render one ground-truth phantom (+ labels, annotated copy)
//   scan      simulate ICT scans of seeded phantoms into a labelled image set
//   augment   kernel-filter + random-crop a labelled set up to a target count
//   train     fit the detector, write model, training log and held-out labels
//   detect    tiled inference over images, detections file, defect database
//   eval      IoU / MIoU / precision / recall against labels
//   report    eval summary, per-image quality grades, annotated images
//
// Exit status: 0 success, 1 invalid input or usage, 2 runtime failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "indt/indt.hpp"

namespace fs = std::filesystem;
using namespace indt;

namespace {

struct Globals {
    std::string config;
    int jobs = 1;
    bool strict = false;
};

std::uint64_t need_seed(const std::optional<std::uint64_t>& seed, const Globals& g, const char* cmd) {
    if (seed) return *seed;
    if (g.strict) throw ValidationError(std::string(cmd) + ": --seed is required in --strict mode");
    return 0;
}

// Image references in tabular files are relative to the file's directory.
fs::path resolve_ref(const fs::path& table, const std::string& ref) {
    return (fs::absolute(table).parent_path() / ref).lexically_normal();
}

std::string make_ref(const fs::path& table, const fs::path& image) {
    const fs::path dir = fs::absolute(table).parent_path();
    return fs::absolute(image).lexically_normal().lexically_proximate(dir).generic_string();
}

void ensure_parent(const fs::path& file) {
    const fs::path dir = fs::absolute(file).parent_path();
    if (!dir.empty()) fs::create_directories(dir);
}

std::string source_of_ref(const std::string& ref) {
    const fs::path p(ref);
    auto it = p.begin();
    if (std::distance(p.begin(), p.end()) > 1) return it->string();
    return p.stem().string();
}

std::vector<LabeledImage> load_labeled(const fs::path& labels, bool source_from_dir) {
    std::vector<LabeledImage> items;
    for (auto& e : read_labels(labels)) {
        LabeledImage li;
        li.image = read_pgm(resolve_ref(labels, e.image));
        li.boxes = std::move(e.boxes);
        li.source_id = source_from_dir ? source_of_ref(e.image) : fs::path(e.image).stem().string();
        items.push_back(std::move(li));
    }
    return items;
}

struct PhantomFlags {
    int size = 512;
    int margin = 32;
    int spot_grid = 8;
    double spot_radius = 7.0;
    double void_rate = 0.3;
    double noise = 0.02;

    void add(CLI::App* c) {
        c->add_option("--size", size, "phantom side in pixels")->capture_default_str();
        c->add_option("--margin", margin, "case margin in pixels")->capture_default_str();
        c->add_option("--spot-grid", spot_grid, "welding spots per row and column")->capture_default_str();
        c->add_option("--spot-radius", spot_radius, "welding spot radius")->capture_default_str();
        c->add_option("--void-rate", void_rate, "probability that a spot carries a void")->capture_default_str();
        c->add_option("--noise", noise, "additive Gaussian noise sigma")->capture_default_str();
    }

    [[nodiscard]] PhantomSpec spec(std::uint64_t seed) const {
        PhantomSpec s;
        s.width = s.height = size;
        s.case_margin = margin;
        s.spot_rows = s.spot_cols = spot_grid;
        s.spot_radius = spot_radius;
        s.void_rate = void_rate;
        s.noise_sigma = noise;
        s.seed = seed;
        s.validate();
        return s;
    }
};

std::string fmt_real(double v) { return csv::shortest(v); }

void print_summary(std::ostream& os, const EvalReport& r) {
    char buf[96];
    auto line = [&](const char* k, double v) {
        std::snprintf(buf, sizeof buf, "  %-26s %.4f\n", k, v);
        os << buf;
    };
    os << "evaluation\n";
    os << "  images                     " << r.per_image.size() << "\n";
    os << "  ground-truth boxes         " << r.total_gts << "\n";
    os << "  predictions                " << r.total_preds << "\n";
    os << "  matches                    " << r.total_matches << "\n";
    line("MIoU (all gt boxes)", r.miou);
    line("MIoU (matched pairs)", r.matched_miou);
    line("precision", r.precision);
    if (r.precision_undefined) os << "  (no predictions: precision reported as 1 by convention)\n";
    line("recall", r.recall);
}

// Line-delimited key=value records: one summary line, then one per image.
std::string format_eval_report(const EvalReport& r) {
    std::string s = "summary,miou=" + fmt_real(r.miou) + ",matched_miou=" + fmt_real(r.matched_miou) +
                    ",precision=" + fmt_real(r.precision) + ",recall=" + fmt_real(r.recall) +
                    ",precision_undefined=" + (r.precision_undefined ? "1" : "0") +
                    ",images=" + std::to_string(r.per_image.size()) + ",gts=" + std::to_string(r.total_gts) +
                    ",preds=" + std::to_string(r.total_preds) + ",matches=" + std::to_string(r.total_matches) + "\n";
    for (const auto& e : r.per_image) {
        std::string ious;
        for (const auto& m : e.matches) ious += (ious.empty() ? "" : ";") + fmt_real(m.iou);
        s += "image=" + e.image_id + ",gts=" + std::to_string(e.n_gts) + ",preds=" + std::to_string(e.n_preds) +
             ",matched=" + std::to_string(e.matches.size()) + ",unmatched_gts=" +
             std::to_string(e.unmatched_gts.size()) + ",unmatched_preds=" + std::to_string(e.unmatched_preds.size()) +
             ",ious=" + ious + "\n";
    }
    return s;
}

// Pairs a detections file with a label file by resolved image path.
struct EvalInputs {
    BoxesByImage preds;
    BoxesByImage gts;
    std::map<std::string, fs::path> image_paths;  // key -> image file
};

EvalInputs load_eval_inputs(const fs::path& det_file, const fs::path& label_file) {
    EvalInputs in;
    std::map<std::string, std::string> key_of;  // resolved path -> label ref
    for (auto& e : read_labels(label_file)) {
        const fs::path p = resolve_ref(label_file, e.image);
        key_of[p.string()] = e.image;
        in.image_paths[e.image] = p;
        in.gts[e.image] = std::move(e.boxes);
    }
    for (auto& e : read_detections(det_file)) {
        const fs::path p = resolve_ref(det_file, e.image);
        const auto it = key_of.find(p.string());
        if (it == key_of.end())
            throw ValidationError(det_file.string() + ": image '" + e.image + "' does not appear in " +
                                  label_file.string());
        in.preds[it->second] = std::move(e.boxes);
    }
    if (in.preds.size() != in.gts.size())
        throw ValidationError(det_file.string() + " and " + label_file.string() + " cover different image sets (" +
                              std::to_string(in.preds.size()) + " vs " + std::to_string(in.gts.size()) + ")");
    return in;
}

std::vector<BBox> boxes_of(const FullDetection& fd) {
    std::vector<BBox> b;
    b.reserve(fd.detections.size());
    for (const auto& d : fd.detections) b.push_back(d.box);
    return b;
}

ModelConfig model_by_name(const std::string& name) {
    if (name == "desk") return desk_model_config();
    if (name == "large") return large_model_config();
    throw ValidationError("--arch: unknown architecture '" + name + "' (desk|large)");
}

// key=value config entries become flags ahead of the user's own arguments,
// so explicit flags win.
std::vector<std::string> with_config(CLI::App& app, std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty()) return args;

    std::set<std::string> known;
    std::map<std::string, std::set<std::string>> owners;  // key -> "" (global) or subcommand
    auto collect = [&](CLI::App* a, const std::string& owner) {
        for (const CLI::Option* o : a->get_options()) {
            for (const auto& n : o->get_lnames()) {
                if (n == "help" || n == "config") continue;
                known.insert(n);
                owners[n].insert(owner);
            }
        }
    };
    collect(&app, "");
    for (CLI::App* sub : app.get_subcommands({})) collect(sub, sub->get_name());
    const RunConfig cfg = load_run_config(path, known);

    std::size_t sub_pos = args.size();
    std::string sub_name;
    for (std::size_t i = 0; i < args.size(); ++i) {
        for (CLI::App* sub : app.get_subcommands({}))
            if (args[i] == sub->get_name()) {
                sub_pos = i;
                sub_name = args[i];
            }
        if (sub_pos != args.size()) break;
    }
    std::vector<std::string> global_flags, sub_flags;
    for (const auto& [key, value] : cfg.entries) {
        const auto& own = owners[key];
        if (!own.count(sub_name) && !own.count("")) continue;  // belongs to another subcommand
        auto& dst = own.count(sub_name) ? sub_flags : global_flags;
        const CLI::Option* opt = own.count(sub_name) ? app.get_subcommand(sub_name)->get_option("--" + key)
                                                     : app.get_option("--" + key);
        if (opt->get_type_size() == 0) {
            if (value == "true" || value == "1") {
                dst.push_back("--" + key);
            } else if (value != "false" && value != "0") {
                throw ValidationError(path + ": flag '" + key + "' expects true or false");
            }
        } else {
            dst.push_back("--" + key + "=" + value);
        }
    }
    std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos));
    out.insert(out.end(), global_flags.begin(), global_flags.end());
    if (sub_pos < args.size()) {
        out.push_back(args[sub_pos]);
        out.insert(out.end(), sub_flags.begin(), sub_flags.end());
        out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1, args.end());
    }
    return out;
}

// Output location under `dir` for an image reference, without leaving `dir`.
fs::path under(const fs::path& dir, const std::string& ref) {
    fs::path out = dir;
    for (const auto& part : fs::path(ref)) {
        if (part == ".." || part == "." || part == "/" || part.empty()) continue;
        out /= part;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"indt: simulated ICT inspection with an SSD-style defect detector"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config, "key=value file; keys are long flag names");
    app.add_option("--jobs", g.jobs, "worker threads (results do not depend on it)")->capture_default_str();
    app.add_flag("--strict", g.strict, "require explicit seeds");

    // phantom
    auto* c_ph = app.add_subcommand("phantom", "render a ground-truth phantom");
    PhantomFlags ph_flags;
    std::optional<std::uint64_t> ph_seed;
    std::string ph_out, ph_labels, ph_annot;
    ph_flags.add(c_ph);
    c_ph->add_option("--seed", ph_seed, "phantom seed");
    c_ph->add_option("--out", ph_out, "output PGM")->required();
    c_ph->add_option("--labels", ph_labels, "label file for the phantom");
    c_ph->add_option("--annotated", ph_annot, "PGM with box outlines");

    // scan
    auto* c_scan = app.add_subcommand("scan", "simulate ICT scans of seeded phantoms");
    PhantomFlags sc_flags;
    std::optional<std::uint64_t> sc_seed;
    std::string sc_dir, sc_filter = "hann";
    int sc_count = 1, sc_angles = 180;
    bool sc_sino = false;
    sc_flags.add(c_scan);
    c_scan->add_option("--seed", sc_seed, "base seed; part i uses a seed derived from (seed, i)");
    c_scan->add_option("--count", sc_count, "number of parts")->capture_default_str();
    c_scan->add_option("--angles", sc_angles, "projection angles over 180 degrees")->capture_default_str();
    c_scan->add_option("--filter", sc_filter, "reconstruction filter: ramp|hann")->capture_default_str();
    c_scan->add_option("--out-dir", sc_dir, "output directory")->required();
    c_scan->add_flag("--save-sinograms", sc_sino, "also write SINO files");

    // augment
    auto* c_aug = app.add_subcommand("augment", "kernel filtering and random cropping");
    std::optional<std::uint64_t> au_seed;
    std::string au_labels, au_dir;
    std::size_t au_target = 3000;
    int au_crop = 128;
    double au_keep = kDefaultKeepFraction;
    c_aug->add_option("--seed", au_seed, "augmentation seed");
    c_aug->add_option("--labels", au_labels, "source label file")->required();
    c_aug->add_option("--out-dir", au_dir, "output directory")->required();
    c_aug->add_option("--target", au_target, "number of augmented images")->capture_default_str();
    c_aug->add_option("--crop", au_crop, "crop side in pixels")->capture_default_str();
    c_aug->add_option("--keep-fraction", au_keep, "minimum retained area fraction of a clipped box")
        ->capture_default_str();

    // train
    auto* c_train = app.add_subcommand("train", "train the detector");
    std::optional<std::uint64_t> tr_seed, tr_init_seed;
    std::string tr_labels, tr_model, tr_log, tr_test, tr_mode = "source", tr_arch = "desk";
    TrainConfig tcfg;
    double tr_score = 0.5;
    c_train->add_option("--seed", tr_seed, "split and shuffle seed");
    c_train->add_option("--init-seed", tr_init_seed, "weight initialisation seed (default: --seed)");
    c_train->add_option("--labels", tr_labels, "augmented label file")->required();
    c_train->add_option("--model", tr_model, "output model file")->required();
    c_train->add_option("--log", tr_log, "training log (epoch,mean_loss,eval_miou)");
    c_train->add_option("--test-labels", tr_test, "write the held-out items as a label file");
    c_train->add_option("--split-mode", tr_mode, "source|crop")->capture_default_str();
    c_train->add_option("--split-ratio", tcfg.split_ratio, "train fraction")->capture_default_str();
    c_train->add_option("--epochs", tcfg.epochs)->capture_default_str();
    c_train->add_option("--batch-size", tcfg.batch_size)->capture_default_str();
    c_train->add_option("--learning-rate", tcfg.learning_rate)->capture_default_str();
    c_train->add_option("--momentum", tcfg.momentum)->capture_default_str();
    c_train->add_option("--eval-every", tcfg.eval_every, "held-out MIoU every N epochs (0 = never)")
        ->capture_default_str();
    c_train->add_option("--score-thresh", tr_score, "score threshold for held-out evaluation")->capture_default_str();
    c_train->add_option("--arch", tr_arch, "desk (128 input) | large (512 input)")->capture_default_str();

    // detect
    auto* c_det = app.add_subcommand("detect", "tiled inference");
    std::string de_model, de_out, de_db;
    std::vector<std::string> de_images;
    std::string de_labels;
    int de_tile = 0;
    DetectConfig dcfg;
    PipelineConfig pcfg;
    c_det->add_option("--model", de_model, "model file")->required();
    c_det->add_option("--image", de_images, "input PGM (repeatable)");
    c_det->add_option("--labels", de_labels, "process every image listed in this label file");
    c_det->add_option("--out", de_out, "detections file")->required();
    c_det->add_option("--db", de_db, "append detections to this defect database");
    c_det->add_option("--tile", de_tile, "tile side (default: model input size)");
    c_det->add_option("--overlap", pcfg.overlap, "tile overlap in pixels")->capture_default_str();
    c_det->add_option("--edge-band", pcfg.edge_band, "with overlap, drop boxes this close to an inner tile edge")
        ->capture_default_str();
    c_det->add_option("--score-thresh", dcfg.score_thresh)->capture_default_str();
    c_det->add_option("--nms-thresh", dcfg.nms_thresh)->capture_default_str();

    // eval
    auto* c_eval = app.add_subcommand("eval", "evaluate detections against labels");
    std::string ev_det, ev_labels, ev_out;
    double ev_iou = 0.5;
    c_eval->add_option("--detections", ev_det)->required();
    c_eval->add_option("--labels", ev_labels)->required();
    c_eval->add_option("--out", ev_out, "report file");
    c_eval->add_option("--iou-thresh", ev_iou)->capture_default_str();

    // report
    auto* c_rep = app.add_subcommand("report", "summary, quality grades and annotated images");
    std::string rp_det, rp_labels, rp_dir;
    double rp_iou = 0.5;
    GradingRules rules;
    c_rep->add_option("--detections", rp_det)->required();
    c_rep->add_option("--labels", rp_labels)->required();
    c_rep->add_option("--out-dir", rp_dir, "annotated images and grades.csv")->required();
    c_rep->add_option("--iou-thresh", rp_iou)->capture_default_str();
    c_rep->add_option("--max-defect-count", rules.max_defect_count)->capture_default_str();
    c_rep->add_option("--max-defect-area", rules.max_defect_area)->capture_default_str();

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = with_config(app, std::move(args));
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const ValidationError& e) {
        std::cerr << "indt: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "indt: " << e.what() << "\n";
        return 2;
    }

    try {
        if (g.jobs < 1) throw ValidationError("--jobs must be >= 1");

        if (c_ph->parsed()) {
            const Phantom ph = generate_phantom(ph_flags.spec(need_seed(ph_seed, g, "phantom")));
            ensure_parent(ph_out);
            write_pgm(ph_out, ph.image);
            if (!ph_labels.empty()) {
                ensure_parent(ph_labels);
                write_labels(ph_labels, {ImageBoxes{make_ref(ph_labels, ph_out), ph.boxes}});
            }
            if (!ph_annot.empty()) {
                ensure_parent(ph_annot);
                write_pgm(ph_annot, render_annotations(ph.image, ph.boxes, ph.image.max_value() * 1.5));
            }
            std::cerr << "phantom: " << ph.boxes.size() << " voiding spots\n";
        }

        if (c_scan->parsed()) {
            const std::uint64_t seed = need_seed(sc_seed, g, "scan");
            if (sc_count < 1) throw ValidationError("--count must be >= 1");
            ScanConfig cfg;
            cfg.n_angles = sc_angles;
            if (sc_filter == "ramp") cfg.filter.kind = FilterKind::Ramp;
            else if (sc_filter == "hann") cfg.filter.kind = FilterKind::RamLakHann;
            else throw ValidationError("--filter: expected ramp or hann, got '" + sc_filter + "'");
            fs::create_directories(sc_dir);
            const fs::path labels = fs::path(sc_dir) / "labels.csv";
            std::vector<ImageBoxes> rows;
            for (int i = 0; i < sc_count; ++i) {
                const ScanResult r = scan_part(sc_flags.spec(derive_seed(seed, static_cast<std::uint64_t>(i))), cfg);
                char name[32];
                std::snprintf(name, sizeof name, "scan_%03d", i);
                write_pgm(fs::path(sc_dir) / (std::string(name) + ".pgm"), r.reconstruction);
                if (sc_sino) write_sinogram(fs::path(sc_dir) / (std::string(name) + ".sino"), r.sinogram);
                rows.push_back(ImageBoxes{std::string(name) + ".pgm", r.ground_truth});
            }
            write_labels(labels, rows);
            std::cerr << "scan: " << sc_count << " parts -> " << labels.string() << "\n";
        }

        if (c_aug->parsed()) {
            const std::uint64_t seed = need_seed(au_seed, g, "augment");
            const auto sources = load_labeled(au_labels, false);
            AugmentConfig cfg;
            cfg.crop = au_crop;
            cfg.keep_fraction = au_keep;
            fs::create_directories(au_dir);
            const fs::path labels = fs::path(au_dir) / "labels.csv";
            const int digits = std::max<int>(4, static_cast<int>(std::to_string(au_target - 1).size()));
            std::vector<ImageBoxes> rows;
            rows.reserve(au_target);
            for_each_augmented(
                sources, au_target, cfg, seed,
                [&](const AugmentOrigin& o, LabeledImage li) {
                    std::string num = std::to_string(o.index);
                    num.insert(0, static_cast<std::size_t>(std::max(0, digits - static_cast<int>(num.size()))), '0');
                    const std::string ref = li.source_id + "/" + num + ".pgm";
                    const fs::path out = fs::path(au_dir) / ref;
                    fs::create_directories(out.parent_path());
                    write_pgm(out, li.image);
                    rows.push_back(ImageBoxes{ref, std::move(li.boxes)});
                },
                [](std::string_view w) { std::cerr << "augment: warning: " << w << "\n"; });
            write_labels(labels, rows);
            std::cerr << "augment: " << rows.size() << " images -> " << labels.string() << "\n";
        }

        if (c_train->parsed()) {
            tcfg.seed = need_seed(tr_seed, g, "train");
            tcfg.jobs = g.jobs;
            tcfg.validate();
            const std::uint64_t init_seed = tr_init_seed.value_or(tcfg.seed);
            SplitMode mode;
            if (tr_mode == "source") mode = SplitMode::Source;
            else if (tr_mode == "crop") mode = SplitMode::Crop;
            else throw ValidationError("--split-mode: expected source or crop, got '" + tr_mode + "'");
            const ModelConfig model = model_by_name(tr_arch);
            const auto refs = read_labels(tr_labels);
            const auto items = load_labeled(tr_labels, true);
            for (const auto& li : items)
                if (li.image.width() != model.layout.input_size || li.image.height() != model.layout.input_size)
                    throw ValidationError(tr_labels + ": training images must be " +
                                          std::to_string(model.layout.input_size) + " pixels square");
            const SplitResult split = split_dataset(source_ids_of(items), tcfg.split_ratio, tcfg.seed, mode);
            std::cerr << "train: " << split.train.size() << " train / " << split.test.size() << " test items\n";
            if (!tr_test.empty()) {
                ensure_parent(tr_test);
                std::vector<ImageBoxes> rows;
                for (std::size_t i : split.test)
                    rows.push_back(ImageBoxes{make_ref(tr_test, resolve_ref(tr_labels, refs[i].image)), refs[i].boxes});
                write_labels(tr_test, rows);
            }
            DetectConfig dc;
            dc.score_thresh = tr_score;
            PipelineConfig pc;
            pc.tile = model.layout.input_size;
            auto held_out_miou = [&](const DetectorParams& p) {
                BoxesByImage preds, gts;
                for (std::size_t i : split.test) {
                    preds[refs[i].image] = boxes_of(detect_full(items[i].image, p, dc, pc));
                    gts[refs[i].image] = items[i].boxes;
                }
                return evaluate(preds, gts).miou;
            };
            std::string log = "epoch,mean_loss,eval_miou\n";
            std::FILE* log_file = nullptr;
            if (!tr_log.empty()) {
                ensure_parent(tr_log);
                log_file = std::fopen(tr_log.c_str(), "wb");
                if (!log_file) throw RuntimeError("cannot open for writing: " + tr_log);
                std::fputs(log.c_str(), log_file);
                std::fflush(log_file);
            }
            const TrainResult res =
                train(items, split.train, model, tcfg, init_seed, [&](const EpochReport& r, const DetectorParams& p) {
                    std::string miou;
                    if (tcfg.eval_every > 0 && r.epoch % tcfg.eval_every == 0)
                        miou = fmt_real(held_out_miou(quantized_f32(p)));
                    const std::string rec = std::to_string(r.epoch) + "," + fmt_real(r.mean_loss) + "," + miou + "\n";
                    if (log_file) {
                        std::fputs(rec.c_str(), log_file);
                        std::fflush(log_file);
                    }
                    std::cerr << "epoch " << rec;
                });
            if (log_file) std::fclose(log_file);
            ensure_parent(tr_model);
            write_model(fs::path(tr_model), res.params);
            std::cerr << "train: model -> " << tr_model << "\n";
        }

        if (c_det->parsed()) {
            const DetectorParams params = read_model(fs::path(de_model));
            pcfg.tile = de_tile > 0 ? de_tile : params.config.layout.input_size;
            pcfg.jobs = g.jobs;
            std::vector<fs::path> inputs;
            for (const auto& s : de_images) inputs.emplace_back(s);
            if (!de_labels.empty())
                for (const auto& e : read_labels(de_labels)) inputs.push_back(resolve_ref(de_labels, e.image));
            if (inputs.empty()) throw ValidationError("detect: give --image or --labels");
            ensure_parent(de_out);
            std::vector<ImageBoxes> rows;
            std::vector<DefectRecord> records;
            std::size_t tiles = 0;
            for (const auto& path : inputs) {
                const FullDetection fd = detect_full(read_pgm(path), params, dcfg, pcfg);
                tiles += fd.grid.tiles.size();
                const std::string ref = make_ref(de_out, path);
                rows.push_back(ImageBoxes{ref, boxes_of(fd)});
                if (!de_db.empty())
                    for (const auto& d : fd.detections)
                        records.push_back(make_defect_record(make_ref(de_db, path), d.tile_row, d.tile_col, d.box,
                                                             utc_timestamp()));
            }
            write_detections(de_out, rows);
            std::size_t n_det = 0;
            for (const auto& r : rows) n_det += r.boxes.size();
            std::cerr << "tiles processed: " << tiles << "\n";
            std::cerr << "detect: " << n_det << " detections in " << rows.size() << " images -> " << de_out << "\n";
            if (!de_db.empty()) {
                ensure_parent(de_db);
                const auto n = append_defects(de_db, records);
                std::cerr << "detect: " << n << " records appended to " << de_db << "\n";
            }
        }

        if (c_eval->parsed()) {
            const EvalInputs in = load_eval_inputs(ev_det, ev_labels);
            const EvalReport r = evaluate(in.preds, in.gts, ev_iou);
            print_summary(std::cout, r);
            if (!ev_out.empty()) {
                ensure_parent(ev_out);
                csv::write_text(ev_out, format_eval_report(r));
            }
        }

        if (c_rep->parsed()) {
            rules.validate();
            const EvalInputs in = load_eval_inputs(rp_det, rp_labels);
            const EvalReport r = evaluate(in.preds, in.gts, rp_iou);
            print_summary(std::cout, r);
            fs::create_directories(rp_dir);
            std::string grades = "image,grade,reason,n_defects\n";
            std::map<std::string, int> tally;
            for (const auto& [ref, dets] : in.preds) {
                const QualityGrade q = grade_quality(dets, rules);
                ++tally[grade_name(q.grade)];
                grades += ref + "," + grade_name(q.grade) + "," + q.reason + "," + std::to_string(dets.size()) + "\n";
                const GrayImage img = read_pgm(in.image_paths.at(ref));
                const double hi = img.max_value(), lo = img.min_value();
                const double span = hi > lo ? hi - lo : 1.0;
                // ground truth drawn bright, detections dark
                GrayImage annotated = render_annotations(img, in.gts.at(ref), hi + 0.5 * span);
                annotated = render_annotations(annotated, dets, lo - 0.5 * span);
                fs::path out = under(rp_dir, ref);
                out.replace_extension(".annotated.pgm");
                fs::create_directories(out.parent_path());
                write_pgm(out, annotated);
            }
            csv::write_text(fs::path(rp_dir) / "grades.csv", grades);
            std::cout << "quality grades\n";
            for (const char* k : {"PASS", "REVIEW", "REJECT"}) std::cout << "  " << k << " " << tally[k] << "\n";
        }
    } catch (const ValidationError& e) {
        std::cerr << "indt: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "indt: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
