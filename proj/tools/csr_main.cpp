// Command-line surface for the sparse-embedding engine: train a TopK sparse
// autoencoder over dense embeddings, encode corpora, run exact retrieval and
// benchmark the sparse-vs-dense cost trade-off.
//
// Exit codes: 0 success, 2 usage or input error, 3 numeric failure.

#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "csr/bench.hpp"
#include "csr/fidelity.hpp"
#include "csr/index.hpp"
#include "csr/io.hpp"
#include "csr/model.hpp"
#include "csr/objective.hpp"
#include "csr/sparse.hpp"
#include "csr/train_config.hpp"
#include "csr/trainer.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

std::size_t default_threads() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

csr::Metric parse_metric(const std::string& s) {
    if (s == "l2") return csr::Metric::L2;
    if (s == "ip") return csr::Metric::InnerProduct;
    throw CLI::ValidationError("--metric must be 'l2' or 'ip'");
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << text;
    if (!out.good()) throw std::runtime_error(path + ": write failed");
}

struct TrainArgs {
    std::string data, labels, config, out, report;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

int cmd_train(const TrainArgs& a) {
    csr::TrainConfig cfg = csr::load_train_config(a.config);
    if (a.seed_set) cfg.seed = a.seed;
    cfg.validate();

    const csr::DenseMatrix data = csr::load_dense(a.data);
    std::vector<std::uint32_t> labels;
    if (!a.labels.empty()) {
        labels = csr::load_labels(a.labels);
        if (labels.size() != data.rows()) {
            throw std::invalid_argument("labels do not align with data rows");
        }
    }
    if (cfg.supervised && a.labels.empty()) {
        throw std::invalid_argument("supervised config requires --labels");
    }

    const std::string report_path = a.report.empty() ? a.out + ".report" : a.report;
    try {
        csr::TrainResult res = csr::train(data, labels.empty() ? nullptr : &labels, cfg);
        csr::checkpoint(res.model, a.out);
        write_text_file(report_path, res.report.to_csv());
    } catch (const csr::TrainDiverged& e) {
        csr::checkpoint(e.last_good_model, a.out);
        write_text_file(report_path, e.partial_report.to_csv());
        std::cerr << "training diverged: " << e.what() << " (last good checkpoint written to "
                  << a.out << ")\n";
        return kExitNumeric;
    }
    return kExitOk;
}

struct EncodeArgs {
    std::string model, data, out;
    std::size_t k = 0;
    std::size_t threads = 0;
};

int cmd_encode(const EncodeArgs& a) {
    const csr::SaeModel model = csr::load_model(a.model);
    const csr::DenseMatrix data = csr::load_dense(a.data);
    const auto codes = csr::encode_rows(model, data, a.k, a.threads);
    csr::save_sparse(codes, a.out);
    return kExitOk;
}

struct SearchArgs {
    std::string index, query, model;
    std::size_t k = 0;
    std::size_t n = 10;
    std::string metric = "l2";
    std::size_t threads = 0;
};

int cmd_search(const SearchArgs& a) {
    const csr::Metric metric = parse_metric(a.metric);
    const csr::SparseIndex index(csr::load_sparse(a.index));

    std::vector<csr::SparseVector> queries;
    if (!a.model.empty()) {
        if (a.k == 0) throw std::invalid_argument("--k is required when encoding dense queries");
        const csr::SaeModel model = csr::load_model(a.model);
        const csr::DenseMatrix dense = csr::load_dense(a.query);
        queries = csr::encode_rows(model, dense, a.k, a.threads).to_rows();
    } else {
        queries = csr::load_sparse(a.query).to_rows();
    }

    std::vector<csr::KnnResult> results(queries.size());
    const std::size_t nthreads = std::max<std::size_t>(1, std::min(a.threads, queries.size()));
    std::vector<std::thread> pool;
    const std::size_t chunk = (queries.size() + nthreads - 1) / nthreads;
    for (std::size_t t = 0; t < nthreads; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(queries.size(), begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] {
            csr::SparseIndex::Workspace ws;
            for (std::size_t qi = begin; qi < end; ++qi) {
                results[qi] = index.knn(queries[qi], a.n, metric, ws);
            }
        });
    }
    for (auto& th : pool) th.join();

    std::printf("query,rank,id,score\n");
    for (std::size_t qi = 0; qi < results.size(); ++qi) {
        for (std::size_t r = 0; r < results[qi].hits.size(); ++r) {
            std::printf("%zu,%zu,%llu,%.9g\n", qi, r + 1,
                        static_cast<unsigned long long>(results[qi].hits[r].row),
                        results[qi].hits[r].score);
        }
    }
    return kExitOk;
}

struct EvalArgs {
    std::string data, labels, query_data, query_labels, model, out;
    std::vector<std::size_t> ks;
    std::string metric = "l2";
    std::size_t threads = 0;
};

int cmd_eval(const EvalArgs& a) {
    const csr::Metric metric = parse_metric(a.metric);
    const csr::DenseMatrix train = csr::load_dense(a.data);
    const csr::DenseMatrix query = csr::load_dense(a.query_data);
    const auto train_labels = csr::load_labels(a.labels);
    const auto query_labels = csr::load_labels(a.query_labels);
    const csr::SaeModel model = csr::load_model(a.model);

    const auto rows = csr::compare_fidelity(train, train_labels, query, query_labels, model, a.ks,
                                            metric, a.threads);
    const std::string csv = csr::fidelity_csv(rows);
    if (a.out.empty()) {
        std::fputs(csv.c_str(), stdout);
    } else {
        write_text_file(a.out, csv);
    }
    return kExitOk;
}

struct BenchArgs {
    std::string kind = "sparse";
    std::size_t db_size = 1'300'000;
    std::size_t h = 16384;
    std::size_t active_dim = 32;
    std::size_t batch = 512;
    std::size_t rounds = 2000;
    std::size_t warmup = 100;
    std::size_t top_n = 1;
    std::uint64_t seed = csr::kDefaultSeed;
    std::string metric = "l2";
    std::size_t threads = 0;
    std::size_t budget_mb = 4096;
    double baseline_latency = 0.0;
    std::string corpus, queries;
};

int cmd_bench(const BenchArgs& a) {
    csr::BenchProtocol proto;
    proto.query_batch = a.batch;
    proto.rounds = a.rounds;
    proto.warmup = a.warmup;
    proto.db_size = a.db_size;
    proto.seed = a.seed;
    proto.threads = a.threads;
    proto.top_n = a.top_n;
    proto.metric = parse_metric(a.metric);
    proto.dense_budget_bytes = static_cast<std::uint64_t>(a.budget_mb) << 20;

    csr::BenchParams params;
    params.active_dim = a.active_dim;
    params.h = a.h;
    params.db_size = a.db_size;

    csr::BenchResult result;
    if (!a.corpus.empty()) {
        if (a.kind == "sparse") {
            const auto corpus = csr::load_sparse(a.corpus);
            if (a.queries.empty()) throw std::invalid_argument("--queries required with --corpus");
            const auto queries = csr::load_sparse(a.queries).to_rows();
            params.h = corpus.cols();
            params.db_size = corpus.rows();
            proto.query_batch = queries.size();
            result = csr::run_bench_sparse(corpus, queries, proto);
        } else {
            csr::DenseMatrix corpus = csr::load_dense(a.corpus);
            if (a.queries.empty()) throw std::invalid_argument("--queries required with --corpus");
            csr::DenseMatrix queries = csr::load_dense(a.queries);
            if (a.active_dim > 0 && a.active_dim < corpus.cols()) {
                corpus = corpus.truncate_cols(a.active_dim);
                queries = queries.truncate_cols(a.active_dim);
            }
            params.active_dim = corpus.cols();
            params.db_size = corpus.rows();
            proto.query_batch = queries.rows();
            const std::uint64_t bytes = static_cast<std::uint64_t>(corpus.rows()) * corpus.cols() * 4;
            if (bytes > proto.dense_budget_bytes) {
                throw std::invalid_argument("dense corpus exceeds the memory budget");
            }
            result = csr::run_bench_dense(corpus, queries, proto);
        }
    } else {
        const csr::IndexKind kind =
            a.kind == "sparse" ? csr::IndexKind::Sparse : csr::IndexKind::Dense;
        result = csr::run_bench(kind, params, proto);
    }

    if (a.baseline_latency > 0.0) {
        csr::BenchResult base;
        base.mean_latency = a.baseline_latency;
        csr::normalize_relative(result, base);
    }
    const csr::IndexKind kind = a.kind == "sparse" ? csr::IndexKind::Sparse : csr::IndexKind::Dense;
    std::fputs(csr::bench_csv_header().c_str(), stdout);
    std::fputs(csr::bench_csv_row(kind, params, proto, result).c_str(), stdout);
    return kExitOk;
}

int cmd_inspect(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw csr::FormatError(path + ": cannot open file");
    char magic[4] = {0, 0, 0, 0};
    in.read(magic, 4);
    in.close();

    if (std::memcmp(magic, "CSRM", 4) == 0) {
        const csr::SaeModel m = csr::load_model(path);
        std::printf("kind=model d=%zu h=%zu params=%zu\n", m.d, m.h, m.param_count());
        return kExitOk;
    }
    const csr::FileInfo info = csr::inspect_file(path);
    switch (info.kind) {
        case csr::FileKind::Dense:
            std::printf("kind=dense rows=%llu cols=%llu\n",
                        static_cast<unsigned long long>(info.rows),
                        static_cast<unsigned long long>(info.cols));
            break;
        case csr::FileKind::Sparse:
            std::printf("kind=sparse rows=%llu cols=%llu nnz=%llu\n",
                        static_cast<unsigned long long>(info.rows),
                        static_cast<unsigned long long>(info.cols),
                        static_cast<unsigned long long>(info.nnz));
            break;
        case csr::FileKind::Labels:
            std::printf("kind=labels rows=%llu\n", static_cast<unsigned long long>(info.rows));
            break;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"csr: adaptive sparse embeddings with exact sparse retrieval"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train a TopK sparse autoencoder");
    train->add_option("--data", train_args.data, "Dense embedding file")->required();
    train->add_option("--labels", train_args.labels, "Label file (required for supervised runs)");
    train->add_option("--config", train_args.config, "key=value training configuration")->required();
    train->add_option("--out", train_args.out, "Output model checkpoint")->required();
    train->add_option("--report", train_args.report, "Training report path (default: <out>.report)");
    auto* seed_opt = train->add_option("--seed", train_args.seed, "Override the config seed");

    EncodeArgs encode_args;
    auto* encode = app.add_subcommand("encode", "Encode dense embeddings to sparse codes");
    encode->add_option("--model", encode_args.model, "Model checkpoint")->required();
    encode->add_option("--data", encode_args.data, "Dense embedding file")->required();
    encode->add_option("--k", encode_args.k, "Active dimensions per code")->required();
    encode->add_option("--out", encode_args.out, "Output sparse file")->required();
    encode->add_option("--threads", encode_args.threads, "Worker threads")->envname("CSR_THREADS");

    SearchArgs search_args;
    auto* search = app.add_subcommand("search", "Exact nearest-neighbor search over sparse codes");
    search->add_option("--index", search_args.index, "Sparse corpus file")->required();
    search->add_option("--query", search_args.query, "Query file (sparse, or dense with --model)")
        ->required();
    search->add_option("--model", search_args.model, "Model for encode-on-the-fly dense queries");
    search->add_option("--k", search_args.k, "Active dims for encode-on-the-fly");
    search->add_option("--n", search_args.n, "Neighbors per query")->required();
    search->add_option("--metric", search_args.metric, "l2 or ip");
    search->add_option("--threads", search_args.threads, "Worker threads")->envname("CSR_THREADS");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Sparse vs dense fidelity comparison table");
    eval->add_option("--data", eval_args.data, "Corpus dense embeddings")->required();
    eval->add_option("--labels", eval_args.labels, "Corpus labels")->required();
    eval->add_option("--query-data", eval_args.query_data, "Query dense embeddings")->required();
    eval->add_option("--query-labels", eval_args.query_labels, "Query labels")->required();
    eval->add_option("--model", eval_args.model, "Model checkpoint")->required();
    eval->add_option("--ks", eval_args.ks, "Active-dimension sweep, e.g. --ks 2 4 8")
        ->required()
        ->delimiter(',');
    eval->add_option("--metric", eval_args.metric, "l2 or ip");
    eval->add_option("--threads", eval_args.threads, "Worker threads")->envname("CSR_THREADS");
    eval->add_option("--out", eval_args.out, "Write CSV here instead of stdout");

    BenchArgs bench_args;
    auto* bench = app.add_subcommand("bench", "Retrieval cost benchmark (synthetic or real files)");
    bench->add_option("--kind", bench_args.kind, "sparse or dense")
        ->check(CLI::IsMember({"sparse", "dense"}));
    bench->add_option("--db-size", bench_args.db_size, "Corpus rows (synthetic)");
    bench->add_option("--hidden-dim", bench_args.h, "Latent dimension (sparse)");
    bench->add_option("--active-dim", bench_args.active_dim, "k (sparse) or m (dense)");
    bench->add_option("--batch", bench_args.batch, "Queries per batch");
    bench->add_option("--rounds", bench_args.rounds, "Timed rounds");
    bench->add_option("--warmup", bench_args.warmup, "Warm-up rounds");
    bench->add_option("--top-n", bench_args.top_n, "Neighbors per query");
    bench->add_option("--seed", bench_args.seed, "RNG seed");
    bench->add_option("--metric", bench_args.metric, "l2 or ip");
    bench->add_option("--threads", bench_args.threads, "Worker threads")->envname("CSR_THREADS");
    bench->add_option("--budget-mb", bench_args.budget_mb, "Dense allocation budget (MiB)");
    bench->add_option("--baseline-latency", bench_args.baseline_latency,
                      "Seconds per batch of the reference run, for relative_time");
    bench->add_option("--corpus", bench_args.corpus, "Real corpus file instead of synthetic");
    bench->add_option("--queries", bench_args.queries, "Real query file instead of synthetic");

    std::string inspect_path;
    auto* inspect = app.add_subcommand("inspect", "Print header information of any engine file");
    inspect->add_option("--file", inspect_path, "File to inspect")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (*train) {
            train_args.seed_set = seed_opt->count() > 0;
            return cmd_train(train_args);
        }
        if (*encode) {
            if (encode_args.threads == 0) encode_args.threads = default_threads();
            return cmd_encode(encode_args);
        }
        if (*search) {
            if (search_args.threads == 0) search_args.threads = default_threads();
            return cmd_search(search_args);
        }
        if (*eval) {
            if (eval_args.threads == 0) eval_args.threads = default_threads();
            return cmd_eval(eval_args);
        }
        if (*bench) {
            if (bench_args.threads == 0) bench_args.threads = default_threads();
            return cmd_bench(bench_args);
        }
        if (*inspect) return cmd_inspect(inspect_path);
    } catch (const csr::TrainDiverged&) {
        return kExitNumeric;  // handled inside cmd_train; double safety
    } catch (const csr::DivergenceError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitOk;
}
