#include "cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <string_view>

#include "a2r/ann.hpp"
#include "a2r/bank.hpp"
#include "a2r/bank_store.hpp"
#include "a2r/cxloss.hpp"
#include "a2r/error.hpp"
#include "a2r/metrics.hpp"
#include "a2r/objectives.hpp"
#include "a2r/realify.hpp"
#include "a2r/reference.hpp"

namespace a2r::cli {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    if (std::string_view(buf) == "-0.000000") return "0.000000";
    return buf;
}

int parse_nprobe(const std::string& s) {
    if (s == "all") return kProbeAll;
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used == s.size() && v >= 0) return v;
    } catch (const std::exception&) {
    }
    throw CLI::ValidationError("--nprobe", "expected a non-negative integer or 'all', got '" + s + "'");
}

bool is_image_file(const fs::path& p) {
    const auto ext = p.extension().string();
    return ext == ".png" || ext == ".ppm";
}

LabelMaskSet masks_or_empty(const std::string& dir, const Image& img) {
    if (dir.empty()) return LabelMaskSet(img.width, img.height);
    return load_masks(dir, img.width, img.height);
}

struct Options {
    int threads = 0;
    std::uint64_t seed = 0;

    // build-bank
    std::string images, masks, out_dir, scales = "4x4:4,8x8:5,16x16:6";
    std::size_t pca_threshold = 1'000'000;
    bool compress = false;
    int pca_dim = 0;
    double coverage = kDefaultCoverage;
    int nlist = 0;

    // bank-info / search
    std::string bank, query;
    int k = 5;
    std::string nprobe = "0";
    bool exact = false;

    // cx-loss / realify
    std::string image, banks, grad_out, out_image, trace_out;
    double h = kDefaultBandwidth;
    bool stop_grad_min = false;
    OptimizeConfig opt;

    // fid / entropy / losses
    std::string fa, fb, probs;
    bool demo = false;
    std::string cycle_norm = "l1";
};

std::vector<ScaleSpec> scales_flag(const std::string& text) {
    try {
        return parse_scales(text);
    } catch (const Error& e) {
        throw CLI::ValidationError("--scales", e.what());
    }
}

CxConfig cx_config(const Options& o) {
    CxConfig cfg;
    cfg.scales = scales_flag(o.scales);
    cfg.h = o.h;
    cfg.k = o.k;
    cfg.nprobe = parse_nprobe(o.nprobe);
    cfg.coverage_threshold = o.coverage;
    cfg.stop_grad_min = o.stop_grad_min;
    return cfg;
}

IndexParams index_params(const Options& o) {
    IndexParams p;
    p.n_list = o.nlist;
    p.seed = o.seed;
    return p;
}

void cmd_build_bank(const Options& o, std::ostream& out) {
    out << "# build-bank images=" << o.images << " masks=" << (o.masks.empty() ? "-" : o.masks)
        << " scales=" << o.scales << " coverage=" << num(o.coverage) << " pca_threshold=" << o.pca_threshold
        << " compress=" << (o.compress ? 1 : 0) << " nlist=" << o.nlist << " seed=" << o.seed << "\n";
    if (!fs::is_directory(o.images)) throw Error("image directory not found: " + o.images);
    std::set<fs::path> files;
    for (const auto& e : fs::directory_iterator(o.images))
        if (e.is_regular_file() && is_image_file(e.path())) files.insert(e.path());
    if (files.empty()) throw Error("no images in " + o.images);

    std::vector<CorpusItem> corpus;
    for (const auto& f : files) {
        Image img = load_image(f);
        LabelMaskSet masks(img.width, img.height);
        if (!o.masks.empty()) {
            const fs::path mdir = fs::path(o.masks) / f.stem();
            if (fs::is_directory(mdir)) masks = load_masks(mdir, img.width, img.height);
        }
        corpus.push_back({std::move(img), std::move(masks)});
    }
    BankBuildOptions bo;
    bo.pca_threshold = o.pca_threshold;
    bo.force_compress = o.compress;
    bo.pca_dim = o.pca_dim;
    bo.coverage_threshold = o.coverage;
    const BankStore store = build_store(corpus, scales_flag(o.scales), bo, index_params(o));
    store.save_dir(o.out_dir);
    for (const auto& [key, ib] : store)
        out << "bank " << bank_file_name(ib.bank.class_id(), ib.bank.scale()) << " class " << ib.bank.class_id()
            << " scale " << ib.bank.scale().to_string() << " count " << ib.bank.count() << " dim " << ib.bank.dim()
            << " nlist " << ib.index.n_list() << "\n";
}

void cmd_bank_info(const Options& o, std::ostream& out) {
    out << "# bank-info bank=" << o.bank << "\n";
    const MemoryBank b = MemoryBank::load(o.bank);
    double mean_norm = 0.0;
    for (float v : b.mean()) mean_norm += static_cast<double>(v) * v;
    char fp[16];
    std::snprintf(fp, sizeof fp, "%08x", b.fingerprint());
    out << "class " << b.class_id() << "\n"
        << "scale " << b.scale().to_string() << "\n"
        << "dim " << b.dim() << "\n"
        << "count " << b.count() << "\n"
        << "quantized " << (b.quantized() ? 1 : 0) << "\n"
        << "pca_dim " << (b.pca() ? b.pca()->output_dim : 0) << "\n"
        << "mean_norm " << num(std::sqrt(mean_norm)) << "\n"
        << "fingerprint " << fp << "\n";
    const auto ip = index_path_for(o.bank);
    if (fs::exists(ip)) {
        const AnnIndex idx = AnnIndex::load(ip);
        idx.check_bound_to(b);
        out << "index nlist " << idx.n_list() << " nprobe_default " << idx.nprobe_default() << " seed " << idx.seed()
            << "\n";
    } else {
        out << "index none\n";
    }
}

void cmd_search(const Options& o, std::ostream& out) {
    out << "# search bank=" << o.bank << " query=" << o.query << " k=" << o.k << " nprobe=" << o.nprobe
        << " exact=" << (o.exact ? 1 : 0) << " seed=" << o.seed << "\n";
    const int nprobe = parse_nprobe(o.nprobe);
    const MemoryBank bank = MemoryBank::load(o.bank);
    const auto features = metrics::load_features(o.query);
    if (features.d() != bank.dim())
        throw Error("query dimension " + std::to_string(features.d()) + " does not match bank dimension " +
                    std::to_string(bank.dim()));
    std::vector<double> queries(static_cast<std::size_t>(features.n()) * features.d());
    for (Eigen::Index i = 0; i < features.n(); ++i)
        for (Eigen::Index j = 0; j < features.d(); ++j) queries[i * features.d() + j] = features.rows(i, j);

    std::vector<NeighborList> result;
    if (o.exact) {
        result = reference::brute_force_knn(bank, queries, o.k);
    } else {
        const auto ip = index_path_for(o.bank);
        const AnnIndex index = fs::exists(ip) ? AnnIndex::load(ip) : AnnIndex::train(bank, index_params(o));
        result = search(index, bank, queries, SearchParams{o.k, nprobe});
    }
    for (std::size_t q = 0; q < result.size(); ++q) {
        out << "query " << q << ":";
        for (const auto& n : result[q]) out << " " << n.id << " " << num(n.distance);
        out << "\n";
    }
}

void print_report(const CxLossReport& rep, std::ostream& out) {
    for (const auto& c : rep.classes)
        out << c.scale.to_string() << " " << c.class_id << " " << num(c.loss) << " " << c.patches << "\n";
    for (const auto& s : rep.scales) out << "scale " << s.scale.to_string() << " " << num(s.loss) << "\n";
    out << "total " << num(rep.total) << "\n";
}

void write_gradient(const std::vector<double>& grad, const Image& img, const std::string& path) {
    metrics::FeatureSet f;
    f.rows.resize(static_cast<Eigen::Index>(img.width) * img.height, Image::channels);
    for (Eigen::Index i = 0; i < f.rows.rows(); ++i)
        for (int c = 0; c < Image::channels; ++c) f.rows(i, c) = grad[i * Image::channels + c];
    metrics::save_features(f, path);
}

void cmd_cx_loss(const Options& o, std::ostream& out) {
    out << "# cx-loss image=" << o.image << " masks=" << (o.masks.empty() ? "-" : o.masks) << " banks=" << o.banks
        << " scales=" << o.scales << " h=" << num(o.h) << " k=" << o.k << " nprobe=" << o.nprobe
        << " exact=" << (o.exact ? 1 : 0) << " stop_grad_min=" << (o.stop_grad_min ? 1 : 0) << "\n";
    if (o.exact && !o.grad_out.empty())
        throw CLI::ValidationError("--grad-out", "gradients are not available in --exact mode");
    const CxConfig cfg = cx_config(o);
    const Image img = load_image(o.image);
    const LabelMaskSet masks = masks_or_empty(o.masks, img);
    const BankStore store = BankStore::load_dir(o.banks, index_params(o));
    if (o.exact) {
        print_report(reference::dense_cx_loss(img, store, masks, cfg), out);
        return;
    }
    const CxLossReport rep = evaluate_cx(img, store, masks, cfg, {.gradient = !o.grad_out.empty()});
    print_report(rep, out);
    if (!o.grad_out.empty()) write_gradient(rep.gradient, img, o.grad_out);
}

void cmd_realify(const Options& o, std::ostream& out) {
    out << "# realify image=" << o.image << " masks=" << (o.masks.empty() ? "-" : o.masks) << " banks=" << o.banks
        << " scales=" << o.scales << " h=" << num(o.h) << " k=" << o.k << " nprobe=" << o.nprobe
        << " steps=" << o.opt.steps << " lr=" << num(o.opt.lr) << " content_weight=" << num(o.opt.content_weight)
        << " patience=" << o.opt.patience << " seed=" << o.seed << "\n";
    const CxConfig cfg = cx_config(o);
    const Image img = load_image(o.image);
    const LabelMaskSet masks = masks_or_empty(o.masks, img);
    const BankStore store = BankStore::load_dir(o.banks, index_params(o));
    OptimizeConfig opt = o.opt;
    opt.seed = o.seed;

    const auto before = nn_drift(img, store, masks, cfg);
    const RealifyResult res = realify(img, store, masks, opt, cfg);
    const auto after = nn_drift(res.image, store, masks, cfg);

    out << "initial total " << num(res.trace.steps.front().total) << " cx " << num(res.trace.steps.front().cx) << "\n";
    out << "best total " << num(res.trace.best().total) << " cx " << num(res.trace.best().cx) << " anchor "
        << num(res.trace.best().anchor) << " step " << res.trace.best_step << "\n";
    out << "evaluations " << res.trace.steps.size() << "\n";
    for (std::size_t s = 0; s < before.size(); ++s)
        out << "drift " << before[s].scale.to_string() << " " << num(before[s].mean_distance) << " -> "
            << num(after[s].mean_distance) << "\n";
    if (!o.out_image.empty()) save_image(res.image, o.out_image);
    if (!o.trace_out.empty()) {
        std::ofstream csv(o.trace_out);
        if (!csv) throw Error("cannot write " + o.trace_out);
        csv << "step,total,cx,anchor\n";
        for (const auto& t : res.trace.steps)
            csv << t.step << "," << num(t.total) << "," << num(t.cx) << "," << num(t.anchor) << "\n";
    }
}

void cmd_fid(const Options& o, std::ostream& out) {
    out << "# fid a=" << o.fa << " b=" << o.fb << "\n";
    const auto a = metrics::gaussian_fit(metrics::load_features(o.fa));
    const auto b = metrics::gaussian_fit(metrics::load_features(o.fb));
    out << "fid " << num(metrics::fid(a, b)) << "\n";
}

void cmd_entropy(const Options& o, std::ostream& out) {
    out << "# entropy probs=" << o.probs << "\n";
    out << "entropy " << num(metrics::mean_entropy(metrics::load_features(o.probs).rows)) << "\n";
}

void cmd_losses(const Options& o, std::ostream& out) {
    out << "# losses demo=" << (o.demo ? 1 : 0) << " cycle_norm=" << o.cycle_norm << "\n";
    if (!o.demo) throw CLI::ValidationError("losses", "only --demo is supported");
    namespace ob = objectives;
    const std::vector<double> half{0.5, 0.5};
    const double gan = ob::gan_loss({half, half});
    const std::vector<double> real_hi{1.0}, fake_lo{0.0};
    const double gan_perfect = ob::gan_loss({real_hi, fake_lo});
    Image zero(4, 4, 0.0), mid(4, 4, 0.5);
    const auto norm = o.cycle_norm == "l2" ? ob::CycleNorm::L2 : ob::CycleNorm::L1;
    const double cyc = ob::cycle_loss(zero, mid, zero, zero, norm);
    const double cca = ob::cca_loss(gan, gan, cyc);
    out << "gan_uniform " << num(gan) << "\n"
        << "gan_perfect " << num(gan_perfect) << "\n"
        << "cycle_" << o.cycle_norm << " " << num(cyc) << "\n"
        << "cca " << num(cca) << "\n"
        << "full_lambda_0.1 " << num(ob::full_loss(1.0, 2.0)) << "\n"
        << "full_lambda_0 " << num(ob::full_loss(cca, 2.0, {0.0})) << "\n";
    out << "mask_refresh";
    for (int e : {39, 40, 41, 60, 61, 80}) out << " " << e << ":" << (ob::mask_refresh_due(e) ? 1 : 0);
    out << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Semantic patch memory banks, contextual loss and evaluation metrics", "a2r"};
    app.require_subcommand(1);
    // -h would clash with the bandwidth flag --h.
    app.set_help_flag("--help", "Print this help message and exit");
    Options o;
    app.add_option("--threads", o.threads, "Worker threads (default: all cores, or A2R_THREADS)")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--seed", o.seed, "Seed for index training");

    auto add_scales = [&](CLI::App* c) {
        c->add_option("--scales,--scale", o.scales, "Scales as PxP:S, comma-separated");
    };
    auto add_cx = [&](CLI::App* c) {
        c->add_option("--image", o.image, "Input image (PNG or PPM)")->required();
        c->add_option("--masks", o.masks, "Directory of <class_id>.png masks");
        c->add_option("--banks", o.banks, "Directory of .a2rb banks")->required();
        add_scales(c);
        c->add_option("--h", o.h, "Affinity bandwidth")->check(CLI::PositiveNumber);
        c->add_option("--k", o.k, "Neighbors per generated patch")->check(CLI::PositiveNumber);
        c->add_option("--nprobe", o.nprobe, "Lists probed per query, or 'all'");
        c->add_option("--nlist", o.nlist, "Lists for indices trained on the fly");
        c->add_option("--coverage", o.coverage, "Class coverage threshold")->check(CLI::Range(1e-9, 1.0));
    };

    auto* build = app.add_subcommand("build-bank", "Build memory banks and indices from a photo corpus");
    build->add_option("--images", o.images, "Directory of RGB images")->required();
    build->add_option("--masks", o.masks, "Directory with one mask subdirectory per image stem");
    build->add_option("--out", o.out_dir, "Output directory")->required();
    add_scales(build);
    build->add_option("--pca-threshold", o.pca_threshold, "Bank size from which PCA + quantization apply");
    build->add_flag("--compress", o.compress, "Apply PCA + quantization to every bank");
    build->add_option("--pca-dim", o.pca_dim, "PCA output dimension (default min(64, dim))");
    build->add_option("--coverage", o.coverage, "Class coverage threshold")->check(CLI::Range(1e-9, 1.0));
    build->add_option("--nlist", o.nlist, "Inverted lists per index (default ceil(sqrt(N)))");

    auto* info = app.add_subcommand("bank-info", "Describe a bank file");
    info->add_option("bank,--bank", o.bank, "Bank file")->required();

    auto* srch = app.add_subcommand("search", "k-NN search of query vectors in a bank");
    srch->add_option("--bank", o.bank, "Bank file")->required();
    srch->add_option("--query", o.query, "Query vectors (A2RF or CSV)")->required();
    srch->add_option("--k", o.k, "Neighbors per query")->check(CLI::PositiveNumber);
    srch->add_option("--nprobe", o.nprobe, "Lists probed per query, or 'all'");
    srch->add_option("--nlist", o.nlist, "Lists when the index is trained on the fly");
    srch->add_flag("--exact", o.exact, "Brute-force scan instead of the index");

    auto* cx = app.add_subcommand("cx-loss", "Multi-scale contextual loss of an image");
    add_cx(cx);
    cx->add_option("--grad-out", o.grad_out, "Write the pixel gradient (A2RF, rows = pixels, 3 columns)");
    cx->add_flag("--exact", o.exact, "Dense affinity matrices, no index");
    cx->add_flag("--stop-grad-min", o.stop_grad_min, "Hold the normalizing minimum constant in the gradient");

    auto* real = app.add_subcommand("realify", "Optimize image pixels against the memory banks");
    add_cx(real);
    real->add_option("--steps", o.opt.steps, "Maximum Adam steps")->check(CLI::PositiveNumber);
    real->add_option("--lr", o.opt.lr, "Learning rate")->check(CLI::PositiveNumber);
    real->add_option("--content-weight", o.opt.content_weight, "Weight of the L2 anchor to the input")
        ->check(CLI::NonNegativeNumber);
    real->add_option("--patience", o.opt.patience, "Early-stopping window")->check(CLI::PositiveNumber);
    real->add_option("--out", o.out_image, "Output image (PNG or PPM)");
    real->add_option("--trace-out", o.trace_out, "CSV trace: step,total,cx,anchor");
    real->add_flag("--stop-grad-min", o.stop_grad_min, "Hold the normalizing minimum constant in the gradient");

    auto* fidc = app.add_subcommand("fid", "Frechet distance between two feature sets");
    fidc->add_option("--a", o.fa, "Feature file")->required();
    fidc->add_option("--b", o.fb, "Feature file")->required();

    auto* ent = app.add_subcommand("entropy", "Mean entropy of probability rows");
    ent->add_option("--probs", o.probs, "Probability rows (A2RF or CSV)")->required();

    auto* losses = app.add_subcommand("losses", "Evaluate the training objectives on fixed inputs");
    losses->add_flag("--demo", o.demo, "Print the demo evaluation");
    losses->add_option("--cycle-norm", o.cycle_norm, "Cycle-consistency norm")->check(CLI::IsMember({"l1", "l2"}));

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    int threads = o.threads;
    if (threads == 0)
        if (const char* env = std::getenv("A2R_THREADS")) threads = std::atoi(env);
    if (threads > 0) omp_set_num_threads(threads);

    try {
        if (*build) cmd_build_bank(o, out);
        else if (*info) cmd_bank_info(o, out);
        else if (*srch) cmd_search(o, out);
        else if (*cx) cmd_cx_loss(o, out);
        else if (*real) cmd_realify(o, out);
        else if (*fidc) cmd_fid(o, out);
        else if (*ent) cmd_entropy(o, out);
        else if (*losses) cmd_losses(o, out);
    } catch (const CLI::Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace a2r::cli
