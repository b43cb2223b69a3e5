// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: generate synthetic tasks, derive idf tables, train
// the toy scorer, encode collections, build and query inverted indexes,
// evaluate runs, check gradients, and sweep training knobs to CSV.
//
// Configuration precedence: command-line flags override values from the
// optional --config file, which overrides built-in defaults.
#include <filesystem>
#include <iostream>
#include <iterator>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sparsekit/sparsekit.hpp"

namespace {

using namespace sparsekit;

// Tokenization shared by the corpus-mode subcommands: the vocabulary is
// rebuilt deterministically from the corpus file (most frequent tokens first,
// capped), so every command given the same corpus and cap agrees on token
// ids. idf smoothing covers ids the cap leaves unseen.
struct TokenizedCorpus {
  Vocabulary vocab;
  std::vector<TokenizedText> docs;
};

TokenizedCorpus tokenize_corpus(const std::vector<BeirText>& corpus,
                                std::size_t max_vocab) {
  std::vector<std::string> texts;
  texts.reserve(corpus.size());
  for (const auto& d : corpus) texts.push_back(d.text);
  TokenizedCorpus out;
  out.vocab = build_vocabulary(texts, max_vocab);
  out.docs.reserve(corpus.size());
  for (const auto& d : corpus) {
    out.docs.push_back(tokenize(d.text, out.vocab));
    if (out.docs.back().empty()) {
      std::cerr << "warning: document '" << d.id
                << "' tokenized to nothing\n";
    }
  }
  return out;
}

// Train-config flags shared by train, grad-check, and sweep.
struct TrainFlags {
  TrainConfig cfg;
  int fold_count = 0;  // 0 = leave k_rank/k_reg as given

  void attach(CLI::App* cmd) {
    cmd->add_option("--steps", cfg.steps, "Optimization steps");
    cmd->add_option("--batch-size", cfg.batch_size, "Documents per batch");
    cmd->add_option("--lr", cfg.learning_rate, "SGD learning rate");
    cmd->add_option("--warmup", cfg.warmup_steps,
                    "Steps over which the regularizer weight ramps in");
    cmd->add_option("--embed-dim", cfg.embed_dim, "Scorer embedding width");
    cmd->add_option("--init-scale", cfg.init_scale,
                    "Scorer initialization scale");
    cmd->add_option("--seed", cfg.seed, "Deterministic run seed");
    cmd->add_option("--probe-interval", cfg.probe_interval,
                    "Steps between document-length probes");
    cmd->add_option("--lambda-d", cfg.loss.lambda_d,
                    "Regularizer weight on document representations");
    cmd->add_option("--threshold-t", cfg.loss.threshold_t,
                    "Active-token threshold below which the mask exempts a "
                    "document from the regularizer");
    cmd->add_flag("--mask", cfg.loss.mask_enabled,
                  "Exempt already-sparse documents from the regularizer");
    cmd->add_option("--temperature", cfg.loss.temperature,
                    "Distillation softmax temperature");
    cmd->add_option("--k-rank", cfg.encoder.k_rank,
                    "Saturation folds in the ranking representation");
    cmd->add_option("--k-reg", cfg.encoder.k_reg,
                    "Saturation folds in the regularizer representation");
    cmd->add_option("--fold-count", fold_count,
                    "Set both --k-rank and --k-reg at once");
    cmd->add_option("--max-input-length", cfg.encoder.max_input_length,
                    "Documents are truncated to this many tokens");
  }

  TrainConfig resolve() const {
    TrainConfig out = cfg;
    if (fold_count != 0) {
      out.encoder.k_rank = fold_count;
      out.encoder.k_reg = fold_count;
    }
    out.validate();
    return out;
  }
};

std::string read_stdin() {
  return std::string((std::istreambuf_iterator<char>(std::cin)),
                     std::istreambuf_iterator<char>());
}

int cmd_gen_task(const SyntheticTaskConfig& cfg, const std::string& out_path,
                 const std::string& beir_dir) {
  const Task task = make_synthetic_task(cfg);
  save_task(task, out_path);
  if (!beir_dir.empty()) {
    std::filesystem::create_directories(beir_dir);
    const auto dir = std::filesystem::path(beir_dir);
    write_beir(task_to_beir(task), (dir / "corpus.jsonl").string(),
               (dir / "queries.jsonl").string(), (dir / "qrels.tsv").string());
  }
  nlohmann::json j{{"docs", task.docs.size()},
                   {"queries", task.queries.size()},
                   {"vocab_size", task.vocab_size},
                   {"train_query_count", task.train_query_count}};
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_build_idf(const std::string& task_path, const std::string& corpus_path,
                  std::size_t max_vocab, const std::string& out_path) {
  IdfTable idf;
  if (!task_path.empty()) {
    const Task task = load_task(task_path);
    idf = task.idf;
  } else {
    const auto corpus = detail::load_beir_jsonl(corpus_path);
    const auto tokenized = tokenize_corpus(corpus, max_vocab);
    idf = build_idf(tokenized.docs, tokenized.vocab.size());
  }
  save_idf(idf, out_path);
  nlohmann::json j{{"vocab_size", idf.size()}};
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_train(const std::string& task_path, const TrainFlags& flags,
              const std::string& model_out, const std::string& init_model_out,
              const std::string& report_out) {
  const Task task = load_task(task_path);
  const TrainConfig cfg = flags.resolve();
  ToyScorer scorer(task.vocab_size, cfg.embed_dim, cfg.seed, cfg.init_scale);
  if (!init_model_out.empty()) save_model(scorer, init_model_out);
  const TrainReport report = train(task, cfg, scorer);
  if (!model_out.empty()) save_model(scorer, model_out);
  if (!report_out.empty()) save_report(report, report_out);
  nlohmann::json j{{"steps", report.steps.size()},
                   {"final_doc_len", report.final_doc_len},
                   {"collapsed", report.collapsed},
                   {"final_total", report.steps.back().total}};
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_encode(const std::string& task_path, const std::string& corpus_path,
               const std::string& queries_path, const std::string& model_path,
               const std::string& idf_path, const std::string& what,
               std::size_t max_vocab, int k_rank, int k_reg,
               std::size_t max_input_length, const std::string& out_path) {
  EncoderConfig ecfg;
  ecfg.k_rank = k_rank;
  ecfg.k_reg = k_reg;
  ecfg.max_input_length = max_input_length;
  ecfg.validate();

  std::vector<std::string> ids;
  std::vector<SparseVector> vectors;

  if (!task_path.empty()) {
    const Task task = load_task(task_path);
    if (what == "docs") {
      const ToyScorer scorer = load_model(model_path);
      ids = task.doc_ids;
      vectors = encode_collection(task, scorer, ecfg);
    } else {
      auto encoded = encode_queries(task, QuerySplit::kAll);
      ids = std::move(encoded.ids);
      vectors = std::move(encoded.reprs);
    }
  } else {
    const ToyScorer scorer = load_model(model_path);
    const auto corpus = detail::load_beir_jsonl(corpus_path);
    const std::size_t cap = std::min(max_vocab, scorer.vocab_size());
    const auto tokenized = tokenize_corpus(corpus, cap);
    const IdfTable idf = idf_path.empty()
                             ? build_idf(tokenized.docs, scorer.vocab_size())
                             : load_idf(idf_path);
    if (what == "docs") {
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        ids.push_back(corpus[i].id);
        vectors.push_back(
            encode_document(tokenized.docs[i], scorer, ecfg, idf).first);
      }
    } else {
      const auto queries = detail::load_beir_jsonl(queries_path);
      for (const auto& q : queries) {
        ids.push_back(q.id);
        vectors.push_back(encode_query(tokenize(q.text, tokenized.vocab), idf));
      }
    }
  }
  save_vectors(ids, vectors, out_path);
  nlohmann::json j{{"count", vectors.size()}, {"doc_len", doc_len(vectors)}};
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_index(const std::string& vectors_path, const std::string& out_path) {
  const VectorFile file = load_vectors(vectors_path);
  const auto index = InvertedIndex::build(file.dim, file.vectors, file.ids);
  index.save(out_path);
  nlohmann::json j{{"docs", index.doc_count()}, {"vocab_size", index.vocab_size()}};
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_search(const std::string& index_path, const std::string& queries_path,
               std::size_t top_k, const std::string& out_path) {
  const InvertedIndex index = InvertedIndex::load(index_path);
  const VectorFile queries = load_vectors(queries_path);
  EncodedQueries encoded;
  encoded.ids = queries.ids;
  encoded.reprs = queries.vectors;
  const Run run = retrieve(index, encoded, top_k);
  if (out_path.empty() || out_path == "-") {
    std::cout << run_to_tsv(run);
  } else {
    save_run(run, out_path);
  }
  return 0;
}

int cmd_eval(const std::string& task_path, const std::string& model_path,
             const std::string& split_name, const std::string& run_path,
             const std::string& qrels_path, const std::string& query_vectors,
             const std::string& doc_vectors, int k_rank, int k_reg,
             std::size_t max_input_length) {
  nlohmann::json j;
  if (!task_path.empty()) {
    const Task task = load_task(task_path);
    const ToyScorer scorer = load_model(model_path);
    EncoderConfig ecfg;
    ecfg.k_rank = k_rank;
    ecfg.k_reg = k_reg;
    ecfg.max_input_length = max_input_length;
    QuerySplit split = QuerySplit::kEval;
    if (split_name == "train") split = QuerySplit::kTrain;
    if (split_name == "all") split = QuerySplit::kAll;
    const EvalResult result = evaluate_model(task, scorer, ecfg, split);
    j["ndcg10"] = result.ndcg10;
    j["flops"] = result.flops;
    j["doc_len"] = result.doc_len;
  } else {
    const Run run = (run_path == "-") ? run_from_tsv(read_stdin())
                                      : load_run(run_path);
    const Qrels qrels = load_qrels(qrels_path);
    j["ndcg10"] = ndcg_at_10(run, qrels);
    if (!query_vectors.empty() && !doc_vectors.empty()) {
      const VectorFile q = load_vectors(query_vectors);
      const VectorFile d = load_vectors(doc_vectors);
      j["flops"] = flops_metric(q.vectors, d.vectors);
      j["doc_len"] = doc_len(d.vectors);
    }
  }
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_grad_check(const std::string& task_path, const TrainFlags& flags,
                   std::size_t probes, double tolerance) {
  const Task task = load_task(task_path);
  const TrainConfig cfg = flags.resolve();
  const GradCheckReport report = grad_check(task, cfg, probes);
  nlohmann::json j{{"probes", report.probes.size()},
                   {"max_rel_err", report.max_rel_err}};
  std::cout << j.dump() << "\n";
  if (tolerance > 0.0 && report.max_rel_err > tolerance) {
    std::cerr << "gradient check failed: max relative error "
              << detail::format_double(report.max_rel_err) << " exceeds "
              << detail::format_double(tolerance) << "\n";
    return 1;
  }
  return 0;
}

int cmd_sweep(const std::string& task_path, const TrainFlags& flags,
              const std::string& axis_name, const std::vector<double>& values,
              const std::string& out_path) {
  const Task task = load_task(task_path);
  SweepSpec spec;
  spec.axis = sweep_axis_from_string(axis_name);
  spec.values = values;
  spec.base = flags.resolve();
  const auto points = run_sweep(task, spec);
  save_sweep(points, spec.axis, out_path);
  std::size_t failed = 0;
  for (const auto& p : points) failed += p.failed ? 1 : 0;
  nlohmann::json j{{"points", points.size()}, {"failed", failed}};
  std::cout << j.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse retrieval toolkit: train, encode, index, search, eval"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read defaults from a TOML/INI config file");

  // gen-task
  auto* gen = app.add_subcommand("gen-task", "Generate a synthetic topic-retrieval task");
  SyntheticTaskConfig task_cfg;
  std::string gen_out, gen_beir_dir;
  gen->add_option("--out", gen_out, "Task JSON output path")->required();
  gen->add_option("--vocab-size", task_cfg.vocab_size, "Vocabulary size");
  gen->add_option("--topics", task_cfg.topic_count, "Topic count");
  gen->add_option("--docs", task_cfg.doc_count, "Document count");
  gen->add_option("--queries", task_cfg.query_count, "Query count");
  gen->add_option("--min-doc-tokens", task_cfg.min_doc_tokens, "Shortest document");
  gen->add_option("--max-doc-tokens", task_cfg.max_doc_tokens, "Longest document");
  gen->add_option("--min-query-tokens", task_cfg.min_query_tokens, "Shortest query");
  gen->add_option("--max-query-tokens", task_cfg.max_query_tokens, "Longest query");
  gen->add_option("--in-topic-prob", task_cfg.in_topic_prob,
                  "Probability a document token comes from its own topic");
  gen->add_option("--train-fraction", task_cfg.train_fraction,
                  "Fraction of queries in the training split");
  gen->add_option("--seed", task_cfg.seed, "Generator seed");
  gen->add_option("--beir-dir", gen_beir_dir,
                  "Also export corpus.jsonl/queries.jsonl/qrels.tsv here");

  // build-idf
  auto* idf_cmd = app.add_subcommand("build-idf", "Derive an idf table from a corpus");
  std::string idf_task, idf_corpus, idf_out;
  std::size_t idf_max_vocab = 65536;
  auto* idf_task_opt = idf_cmd->add_option("--task", idf_task, "Task JSON input");
  auto* idf_corpus_opt =
      idf_cmd->add_option("--corpus", idf_corpus, "Corpus JSONL input");
  idf_cmd->add_option("--max-vocab", idf_max_vocab,
                      "Vocabulary cap for corpus tokenization");
  idf_cmd->add_option("--out", idf_out, "Idf JSON output path")->required();
  idf_task_opt->excludes(idf_corpus_opt);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the toy scorer on a task");
  std::string train_task, train_model_out, train_init_out, train_report_out;
  TrainFlags train_flags;
  train_cmd->add_option("--task", train_task, "Task JSON input")->required();
  train_cmd->add_option("--model-out", train_model_out, "Trained model JSON path");
  train_cmd->add_option("--init-model-out", train_init_out,
                        "Save the untrained checkpoint here before training");
  train_cmd->add_option("--report-out", train_report_out,
                        "Training report JSONL path");
  train_flags.attach(train_cmd);

  // encode
  auto* enc = app.add_subcommand("encode", "Encode documents or queries to sparse vectors");
  std::string enc_task, enc_corpus, enc_queries, enc_model, enc_idf, enc_out;
  std::string enc_what = "docs";
  std::size_t enc_max_vocab = 65536, enc_max_len = 64;
  int enc_k_rank = 1, enc_k_reg = 1;
  auto* enc_task_opt = enc->add_option("--task", enc_task, "Task JSON input");
  auto* enc_corpus_opt = enc->add_option("--corpus", enc_corpus, "Corpus JSONL input");
  enc->add_option("--queries", enc_queries,
                  "Queries JSONL input (corpus mode with --what queries)");
  enc->add_option("--model", enc_model, "Model JSON input");
  enc->add_option("--idf", enc_idf, "Idf JSON input (corpus mode; default derives from the corpus)");
  enc->add_option("--what", enc_what, "docs or queries")
      ->check(CLI::IsMember({"docs", "queries"}));
  enc->add_option("--max-vocab", enc_max_vocab, "Vocabulary cap for corpus tokenization");
  enc->add_option("--k-rank", enc_k_rank, "Saturation folds, ranking representation");
  enc->add_option("--k-reg", enc_k_reg, "Saturation folds, regularizer representation");
  enc->add_option("--max-input-length", enc_max_len, "Document truncation length");
  enc->add_option("--out", enc_out, "Vectors TSV output path")->required();
  enc_task_opt->excludes(enc_corpus_opt);

  // index
  auto* idx = app.add_subcommand("index", "Build an inverted index from encoded vectors");
  std::string idx_vectors, idx_out;
  idx->add_option("--vectors", idx_vectors, "Vectors TSV input")->required();
  idx->add_option("--out", idx_out, "Index binary output path")->required();

  // search
  auto* search = app.add_subcommand("search", "Retrieve top-k documents per query");
  std::string search_index, search_queries, search_out;
  std::size_t search_top_k = 10;
  search->add_option("--index", search_index, "Index binary input")->required();
  search->add_option("--queries", search_queries, "Query vectors TSV input")->required();
  search->add_option("--top-k", search_top_k, "Results per query");
  search->add_option("--out", search_out,
                     "Run TSV output path (default: standard output)");

  // eval
  auto* eval = app.add_subcommand("eval", "Score a run or a model, JSON to stdout");
  std::string eval_task, eval_model, eval_split = "eval";
  std::string eval_run, eval_qrels, eval_qvec, eval_dvec;
  int eval_k_rank = 1, eval_k_reg = 1;
  std::size_t eval_max_len = 64;
  auto* eval_task_opt = eval->add_option("--task", eval_task, "Task JSON input");
  eval->add_option("--model", eval_model, "Model JSON input (task mode)");
  eval->add_option("--split", eval_split, "Query split: train, eval, or all")
      ->check(CLI::IsMember({"train", "eval", "all"}));
  auto* eval_run_opt =
      eval->add_option("--run", eval_run, "Run TSV input; '-' reads standard input");
  eval->add_option("--qrels", eval_qrels, "Qrels TSV input (run mode)");
  eval->add_option("--query-vectors", eval_qvec,
                   "Query vectors TSV for the efficiency metrics (run mode)");
  eval->add_option("--doc-vectors", eval_dvec,
                   "Document vectors TSV for the efficiency metrics (run mode)");
  eval->add_option("--k-rank", eval_k_rank, "Saturation folds, ranking representation");
  eval->add_option("--k-reg", eval_k_reg, "Saturation folds, regularizer representation");
  eval->add_option("--max-input-length", eval_max_len, "Document truncation length");
  eval_task_opt->excludes(eval_run_opt);

  // grad-check
  auto* gc = app.add_subcommand("grad-check",
                                "Compare analytic gradients with finite differences");
  std::string gc_task;
  std::size_t gc_probes = 100;
  double gc_tolerance = 0.0;
  TrainFlags gc_flags;
  gc->add_option("--task", gc_task, "Task JSON input")->required();
  gc->add_option("--probes", gc_probes, "Randomly probed parameter count");
  gc->add_option("--tolerance", gc_tolerance,
                 "Exit nonzero when max relative error exceeds this");
  gc_flags.attach(gc);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Train one model per axis value, CSV out");
  std::string sweep_task, sweep_axis = "lambda", sweep_out;
  std::vector<double> sweep_values;
  TrainFlags sweep_flags;
  sweep->add_option("--task", sweep_task, "Task JSON input")->required();
  sweep->add_option("--axis", sweep_axis, "lambda, threshold, or fold_count")
      ->check(CLI::IsMember({"lambda", "threshold", "fold_count"}));
  sweep->add_option("--values", sweep_values, "Comma-separated grid values")
      ->required()
      ->delimiter(',');
  sweep->add_option("--out", sweep_out, "Sweep CSV output path")->required();
  sweep_flags.attach(sweep);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_task(task_cfg, gen_out, gen_beir_dir);
    if (idf_cmd->parsed()) {
      if (idf_task.empty() == idf_corpus.empty()) {
        std::cerr << "build-idf needs exactly one of --task or --corpus\n";
        return 2;
      }
      return cmd_build_idf(idf_task, idf_corpus, idf_max_vocab, idf_out);
    }
    if (train_cmd->parsed()) {
      return cmd_train(train_task, train_flags, train_model_out,
                       train_init_out, train_report_out);
    }
    if (enc->parsed()) {
      if (enc_task.empty() == enc_corpus.empty()) {
        std::cerr << "encode needs exactly one of --task or --corpus\n";
        return 2;
      }
      if (enc_model.empty() && (enc_what == "docs")) {
        std::cerr << "encode --what docs needs --model\n";
        return 2;
      }
      if (!enc_corpus.empty() && enc_what == "queries" && enc_queries.empty()) {
        std::cerr << "encode --corpus --what queries needs --queries\n";
        return 2;
      }
      return cmd_encode(enc_task, enc_corpus, enc_queries, enc_model, enc_idf,
                        enc_what, enc_max_vocab, enc_k_rank, enc_k_reg,
                        enc_max_len, enc_out);
    }
    if (idx->parsed()) return cmd_index(idx_vectors, idx_out);
    if (search->parsed()) {
      return cmd_search(search_index, search_queries, search_top_k, search_out);
    }
    if (eval->parsed()) {
      if (eval_task.empty() && eval_run.empty()) {
        std::cerr << "eval needs --task (model mode) or --run (run mode)\n";
        return 2;
      }
      if (!eval_task.empty() && eval_model.empty()) {
        std::cerr << "eval --task needs --model\n";
        return 2;
      }
      if (!eval_run.empty() && eval_qrels.empty()) {
        std::cerr << "eval --run needs --qrels\n";
        return 2;
      }
      return cmd_eval(eval_task, eval_model, eval_split, eval_run, eval_qrels,
                      eval_qvec, eval_dvec, eval_k_rank, eval_k_reg,
                      eval_max_len);
    }
    if (gc->parsed()) {
      return cmd_grad_check(gc_task, gc_flags, gc_probes, gc_tolerance);
    }
    if (sweep->parsed()) {
      return cmd_sweep(sweep_task, sweep_flags, sweep_axis, sweep_values,
                       sweep_out);
    }
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
