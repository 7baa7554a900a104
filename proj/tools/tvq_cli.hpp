#pragma once

// `tvq` command-line frontend. Results go to stdout (or --out), diagnostics
// to stderr. Exit codes: 0 success, 1 usage error, 2 data or format error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "tvq/tvq.hpp"

namespace tvq::cli {

namespace fs = std::filesystem;

inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

namespace detail {

inline void write_text(const std::string& text, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
  if (!f) fail("I/O error: cannot open '" + out_path + "' for writing");
  f << text;
  if (!f) fail("I/O error: cannot write '" + out_path + "'");
}

inline void emit(const Json& j, const std::string& out_path, std::ostream& out) {
  write_text(j.dump(2) + "\n", out_path, out);
}

inline std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

inline void verify_digest(const QuantizedArtifact& a, const TensorMap& pre, const std::string& what) {
  if (a.role == Role::fq) return;
  if (a.meta.pre_digest != digest_tensor_map(pre)) {
    fail("digest mismatch: '" + what + "' was not built from this pre-trained checkpoint");
  }
}

struct TaskVectorSources {
  std::vector<std::string> ft;
  std::vector<std::string> qtv;
  std::vector<std::string> bundle;
};

/// Collects task vectors from full-precision checkpoints, FQ/TVQ artifacts
/// and RTVQ bundles, in that order.
inline std::vector<TaskVector> load_task_vectors(const TensorMap& pre, const TaskVectorSources& src,
                                                 unsigned threads) {
  std::vector<TaskVector> tvs;
  for (const auto& p : src.ft) tvs.push_back(task_vector(read_tmap(p), pre, stem_of(p)));
  for (const auto& p : src.qtv) {
    const auto a = read_qtv(p);
    verify_digest(a, pre, p);
    auto tv = reconstructed_task_vector(a, pre, threads);
    if (tv.source_task.empty()) tv.source_task = stem_of(p);
    tvs.push_back(std::move(tv));
  }
  for (const auto& dir : src.bundle) {
    const auto b = read_bundle(dir, digest_tensor_map(pre));
    for (const auto& task : b.manifest.tasks) tvs.push_back(rtvq_reconstruct(b, task, threads));
  }
  if (tvs.empty()) fail("no task vectors given (use --ft, --qtv or --bundle)");
  return tvs;
}

inline std::vector<TensorMap> load_checkpoints(const std::vector<std::string>& paths) {
  std::vector<TensorMap> fts;
  for (const auto& p : paths) fts.push_back(read_tmap(p));
  return fts;
}

inline Shape parse_shape(const std::string& text) {
  Shape shape;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('x', start);
    const std::string part = text.substr(start, end == std::string::npos ? std::string::npos : end - start);
    std::size_t pos = 0;
    unsigned long long d = 0;
    try {
      d = std::stoull(part, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (part.empty() || pos != part.size() || part.front() == '-') throw CLI::ValidationError("--shape", "bad shape '" + text + "'");
    shape.push_back(d);
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return shape;
}

inline std::pair<int, int> parse_pair(const std::string& text) {
  const auto colon = text.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument(text);
    std::size_t p1 = 0;
    std::size_t p2 = 0;
    const int a = std::stoi(text.substr(0, colon), &p1);
    const int b = std::stoi(text.substr(colon + 1), &p2);
    if (p1 != colon || p2 != text.size() - colon - 1) throw std::invalid_argument(text);
    return {a, b};
  } catch (const std::exception&) {
    throw CLI::ValidationError("--rtvq", "expected B:O (base bits:offset bits), got '" + text + "'");
  }
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Task vector quantization for compressing and merging fine-tuned checkpoints", "tvq"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)")->envname("TVQ_THREADS");

  const auto bits_check = CLI::IsMember({2, 3, 4, 8});
  std::function<void()> action;

  // stats
  auto* stats = app.add_subcommand("stats", "Weight-range statistics of a checkpoint or task vector");
  std::string stats_in, stats_pre, stats_out;
  bool stats_table = false;
  stats->add_option("--in", stats_in, "Checkpoint (.tmap)")->required();
  stats->add_option("--pre", stats_pre, "Pre-trained checkpoint; when given, statistics of in - pre");
  stats->add_option("--out", stats_out, "Write JSON here instead of stdout");
  stats->add_flag("--table", stats_table, "Print an aligned table instead of JSON");
  stats->callback([&] {
    action = [&] {
      auto map = read_tmap(stats_in);
      if (!stats_pre.empty()) map = task_vector(map, read_tmap(stats_pre)).tensors;
      const auto s = range_stats(map);
      if (stats_table) {
        detail::write_text(to_table(s), stats_out, out);
      } else {
        detail::emit(to_json(s), stats_out, out);
      }
    };
  });

  // quantize-fq
  auto* qfq = app.add_subcommand("quantize-fq", "Quantize a fine-tuned checkpoint directly");
  std::string qfq_ft, qfq_out, qfq_task;
  int qfq_bits = 8;
  qfq->add_option("--ft", qfq_ft, "Fine-tuned checkpoint (.tmap)")->required();
  qfq->add_option("--bits", qfq_bits, "Bit-width")->required()->check(bits_check);
  qfq->add_option("--out", qfq_out, "Output artifact (.qtv)")->required();
  qfq->add_option("--task", qfq_task, "Task name (default: file stem)");
  qfq->callback([&] {
    action = [&] {
      const auto task = qfq_task.empty() ? detail::stem_of(qfq_ft) : qfq_task;
      write_qtv(quantize_fq(read_tmap(qfq_ft), qfq_bits, task, threads), qfq_out);
    };
  });

  // quantize-tvq
  auto* qtvq = app.add_subcommand("quantize-tvq", "Quantize the task vector ft - pre");
  std::string qtvq_pre, qtvq_ft, qtvq_out, qtvq_task;
  int qtvq_bits = 4;
  qtvq->add_option("--pre", qtvq_pre, "Pre-trained checkpoint (.tmap)")->required();
  qtvq->add_option("--ft", qtvq_ft, "Fine-tuned checkpoint (.tmap)")->required();
  qtvq->add_option("--bits", qtvq_bits, "Bit-width")->required()->check(bits_check);
  qtvq->add_option("--out", qtvq_out, "Output artifact (.qtv)")->required();
  qtvq->add_option("--task", qtvq_task, "Task name (default: file stem)");
  qtvq->callback([&] {
    action = [&] {
      const auto task = qtvq_task.empty() ? detail::stem_of(qtvq_ft) : qtvq_task;
      write_qtv(quantize_tvq(read_tmap(qtvq_ft), read_tmap(qtvq_pre), qtvq_bits, task, threads), qtvq_out);
    };
  });

  // quantize-rtvq
  auto* qr = app.add_subcommand("quantize-rtvq", "Residual quantization of several tasks into a bundle directory");
  std::string qr_pre, qr_out;
  std::vector<std::string> qr_ft, qr_tasks;
  int qr_bb = 3, qr_bo = 2;
  bool qr_no_ec = false;
  qr->add_option("--pre", qr_pre, "Pre-trained checkpoint (.tmap)")->required();
  qr->add_option("--ft", qr_ft, "Fine-tuned checkpoints (.tmap), one per task")->required();
  qr->add_option("--task", qr_tasks, "Task names, one per --ft (default: file stems)");
  qr->add_option("--b-base", qr_bb, "Base vector bit-width")->check(bits_check)->capture_default_str();
  qr->add_option("--b-offset", qr_bo, "Offset vector bit-width")->check(bits_check)->capture_default_str();
  qr->add_flag("--no-error-correction", qr_no_ec, "Take offsets against the unquantized average");
  qr->add_option("--out", qr_out, "Output bundle directory")->required();
  qr->callback([&] {
    action = [&] {
      std::vector<std::string> tasks = qr_tasks;
      if (tasks.empty()) {
        for (const auto& p : qr_ft) tasks.push_back(detail::stem_of(p));
      }
      const auto fts = detail::load_checkpoints(qr_ft);
      write_bundle(rtvq_quantize(fts, read_tmap(qr_pre), RtvqConfig{qr_bb, qr_bo, !qr_no_ec}, tasks, threads), qr_out);
    };
  });

  // dequantize
  auto* deq = app.add_subcommand("dequantize", "Reconstruct a checkpoint (or task vector) from an artifact or bundle");
  std::string deq_in, deq_pre, deq_task, deq_out;
  bool deq_delta = false;
  deq->add_option("--in", deq_in, "Artifact (.qtv) or bundle directory")->required();
  deq->add_option("--pre", deq_pre, "Pre-trained checkpoint (.tmap)");
  deq->add_option("--task", deq_task, "Task to reconstruct from a bundle");
  deq->add_flag("--delta", deq_delta, "Write the reconstructed task vector instead of the checkpoint");
  deq->add_option("--out", deq_out, "Output checkpoint (.tmap)")->required();
  deq->callback([&] {
    action = [&] {
      std::optional<TensorMap> pre;
      if (!deq_pre.empty()) pre = read_tmap(deq_pre);
      TensorMap result;
      if (fs::is_directory(deq_in)) {
        if (deq_task.empty()) throw CLI::RequiredError("--task");
        const auto b = read_bundle(deq_in, pre ? std::optional(digest_tensor_map(*pre)) : std::nullopt);
        auto tv = rtvq_reconstruct(b, deq_task, threads);
        if (!deq_delta && !pre) throw CLI::RequiredError("--pre");
        result = deq_delta ? std::move(tv.tensors) : reconstruct(*pre, tv);
      } else {
        const auto a = read_qtv(deq_in);
        if (a.role == Role::rtvq_base || a.role == Role::rtvq_offset) {
          fail("'" + deq_in + "' is part of a bundle; pass the bundle directory");
        }
        if (pre) detail::verify_digest(a, *pre, deq_in);
        if (a.role == Role::fq && !deq_delta) {
          result = dequantize_artifact(a, threads);
        } else if (a.role == Role::tvq && deq_delta) {
          result = dequantize_artifact(a, threads);
        } else {
          if (!pre) throw CLI::RequiredError("--pre");
          result = deq_delta ? reconstructed_task_vector(a, *pre, threads).tensors
                             : reconstruct_checkpoint(a, *pre, threads);
        }
      }
      write_tmap(result, deq_out);
    };
  });

  // merge
  auto* mg = app.add_subcommand("merge", "Merge task vectors into one multi-task checkpoint");
  std::string mg_method = "task-arithmetic", mg_pre, mg_out, mg_layer_map;
  detail::TaskVectorSources mg_src;
  double mg_lambda = 1.0, mg_density = 1.0, mg_low = 0.0, mg_high = 1.0;
  std::optional<double> mg_alpha, mg_beta;
  mg->add_option("--method", mg_method, "Merge method")
      ->check(CLI::IsMember({"task-arithmetic", "ties", "magmax", "breadcrumbs"}))
      ->capture_default_str();
  mg->add_option("--pre", mg_pre, "Pre-trained checkpoint (.tmap)")->required();
  mg->add_option("--ft", mg_src.ft, "Full-precision fine-tuned checkpoints (.tmap)");
  mg->add_option("--qtv", mg_src.qtv, "FQ or TVQ artifacts (.qtv)");
  mg->add_option("--bundle", mg_src.bundle, "RTVQ bundle directories (all tasks)");
  mg->add_option("--lambda", mg_lambda, "Scaling coefficient")->capture_default_str();
  mg->add_option("--density", mg_density, "Ties: fraction of entries kept per tensor")->capture_default_str();
  mg->add_option("--crumb-low", mg_low, "Breadcrumbs: lower magnitude quantile")->capture_default_str();
  mg->add_option("--crumb-high", mg_high, "Breadcrumbs: upper magnitude quantile")->capture_default_str();
  auto* alpha_opt = mg->add_option("--lines-alpha", mg_alpha, "LiNeS: coefficient of the first layer");
  auto* beta_opt = mg->add_option("--lines-beta", mg_beta, "LiNeS: increase from first to last layer");
  alpha_opt->needs(beta_opt);
  beta_opt->needs(alpha_opt);
  mg->add_option("--layer-map", mg_layer_map, "LiNeS: name<TAB>layer file (default: tensor order)")->needs(alpha_opt);
  mg->add_option("--out", mg_out, "Output checkpoint (.tmap)")->required();
  mg->callback([&] {
    action = [&] {
      const auto pre = read_tmap(mg_pre);
      const auto tvs = detail::load_task_vectors(pre, mg_src, threads);
      MergeConfig cfg;
      cfg.method = merge_method_from_string(mg_method);
      cfg.lambda = mg_lambda;
      cfg.ties_density = mg_density;
      cfg.crumb_low = mg_low;
      cfg.crumb_high = mg_high;
      if (mg_alpha) cfg.lines = LinesConfig{*mg_alpha, *mg_beta};
      std::optional<LayerMap> layers;
      if (!mg_layer_map.empty()) layers = read_layer_map(mg_layer_map);
      write_tmap(merge(pre, tvs, cfg, layers ? &*layers : nullptr, threads), mg_out);
    };
  });

  // compare
  auto* cmp = app.add_subcommand("compare", "Reconstruction error of FQ, TVQ and RTVQ");
  std::string cmp_pre, cmp_out;
  std::vector<std::string> cmp_ft, cmp_rtvq{"3:2"};
  std::vector<int> cmp_bits{2, 3, 4, 8};
  bool cmp_table = false, cmp_no_ec = false;
  cmp->add_option("--pre", cmp_pre, "Pre-trained checkpoint (.tmap)")->required();
  cmp->add_option("--ft", cmp_ft, "Fine-tuned checkpoints (.tmap)")->required();
  cmp->add_option("--bits", cmp_bits, "FQ/TVQ bit-widths")->delimiter(',')->check(bits_check)->capture_default_str();
  cmp->add_option("--rtvq", cmp_rtvq, "RTVQ configs as BASE:OFFSET bits")->delimiter(',')->capture_default_str();
  cmp->add_flag("--no-error-correction", cmp_no_ec, "Disable RTVQ error correction");
  cmp->add_flag("--table", cmp_table, "Print an aligned table instead of JSON");
  cmp->add_option("--out", cmp_out, "Write JSON here instead of stdout");
  cmp->callback([&] {
    action = [&] {
      std::vector<std::pair<int, int>> grid;
      for (const auto& s : cmp_rtvq) grid.push_back(detail::parse_pair(s));
      const auto fts = detail::load_checkpoints(cmp_ft);
      const auto rows = compare_paths(read_tmap(cmp_pre), fts, cmp_bits, grid, !cmp_no_ec, threads);
      if (cmp_table) {
        detail::write_text(to_table(rows), cmp_out, out);
      } else {
        detail::emit(to_json(rows), cmp_out, out);
      }
    };
  });

  // sparsity
  auto* sp = app.add_subcommand("sparsity", "Fraction of task-vector entries quantized to exactly zero");
  std::vector<std::string> sp_in;
  std::string sp_out;
  sp->add_option("--in", sp_in, "Artifacts (.qtv)")->required();
  sp->add_option("--out", sp_out, "Write JSON here instead of stdout");
  sp->callback([&] {
    action = [&] {
      Json rows = Json::array();
      for (const auto& p : sp_in) {
        const auto a = read_qtv(p);
        rows.push_back({{"file", fs::path(p).filename().string()},
                        {"role", to_string(a.role)},
                        {"bits", a.meta.bits},
                        {"sparsity", sparsity(a)}});
      }
      detail::emit(rows, sp_out, out);
    };
  });

  // cosine
  auto* cs = app.add_subcommand("cosine", "Cosine-similarity matrix of task vectors");
  std::string cs_pre, cs_out;
  detail::TaskVectorSources cs_src;
  bool cs_table = false;
  cs->add_option("--pre", cs_pre, "Pre-trained checkpoint (.tmap)")->required();
  cs->add_option("--ft", cs_src.ft, "Full-precision fine-tuned checkpoints (.tmap)");
  cs->add_option("--qtv", cs_src.qtv, "FQ or TVQ artifacts (.qtv)");
  cs->add_option("--bundle", cs_src.bundle, "RTVQ bundle directories");
  cs->add_flag("--table", cs_table, "Print an aligned table instead of JSON");
  cs->add_option("--out", cs_out, "Write JSON here instead of stdout");
  cs->callback([&] {
    action = [&] {
      const auto tvs = detail::load_task_vectors(read_tmap(cs_pre), cs_src, threads);
      const auto m = cosine_matrix(tvs);
      std::vector<std::string> names;
      for (const auto& tv : tvs) names.push_back(tv.source_task);
      if (cs_table) {
        detail::write_text(to_table(m, names), cs_out, out);
      } else {
        detail::emit(Json{{"tasks", names}, {"matrix", m}}, cs_out, out);
      }
    };
  });

  // storage-report
  auto* sr = app.add_subcommand("storage-report", "On-disk size of artifacts versus FP32 checkpoints");
  std::vector<std::string> sr_in;
  std::size_t sr_tasks = 0;
  std::uint64_t sr_params = 0;
  std::string sr_out;
  bool sr_table = false;
  sr->add_option("--in", sr_in, "Artifacts (.qtv) and/or bundle directories")->required();
  sr->add_option("--tasks", sr_tasks, "Number of tasks covered")->required();
  sr->add_option("--params", sr_params, "FP32 parameter count per checkpoint (default: from the first artifact)");
  sr->add_flag("--table", sr_table, "Print an aligned table instead of JSON");
  sr->add_option("--out", sr_out, "Write JSON here instead of stdout");
  sr->callback([&] {
    action = [&] {
      std::vector<fs::path> paths(sr_in.begin(), sr_in.end());
      std::uint64_t params = sr_params;
      if (params == 0) {
        const fs::path first = fs::is_directory(paths.front()) ? paths.front() / kBaseFile : paths.front();
        for (const auto& [_, q] : read_qtv(first).tensors) params += q.size();
      }
      const auto r = storage_report(paths, sr_tasks, params);
      if (sr_table) {
        detail::write_text(to_table(r), sr_out, out);
      } else {
        detail::emit(to_json(r), sr_out, out);
      }
    };
  });

  // effective-bits
  auto* eb = app.add_subcommand("effective-bits", "Per-task storage of an RTVQ configuration");
  int eb_bo = 2, eb_bb = 3;
  std::size_t eb_tasks = 1;
  eb->add_option("--b-offset", eb_bo, "Offset bit-width")->required()->check(bits_check);
  eb->add_option("--b-base", eb_bb, "Base bit-width")->required()->check(bits_check);
  eb->add_option("--tasks", eb_tasks, "Number of tasks")->required()->check(CLI::PositiveNumber);
  eb->callback([&] { action = [&] { out << Json(effective_bits(eb_bo, eb_bb, eb_tasks)).dump() << "\n"; }; });

  // synth
  auto* sy = app.add_subcommand("synth", "Generate a synthetic pre-trained checkpoint and fine-tuned family");
  SynthSpec sy_spec;
  std::vector<std::string> sy_shapes{"64x64"};
  std::string sy_dir;
  sy->add_option("--tasks", sy_spec.n_tasks, "Number of fine-tuned checkpoints")->check(CLI::PositiveNumber)->capture_default_str();
  sy->add_option("--shape", sy_shapes, "Tensor shapes like 256x256 (repeatable)")->capture_default_str();
  sy->add_option("--pre-scale", sy_spec.pre_scale, "Std-dev of pre-trained weights")->check(CLI::NonNegativeNumber)->capture_default_str();
  sy->add_option("--delta-scale", sy_spec.delta_scale, "Std-dev of per-task deltas")->check(CLI::NonNegativeNumber)->capture_default_str();
  sy->add_option("--cluster-scale", sy_spec.cluster_scale, "Std-dev of the shared direction")->check(CLI::NonNegativeNumber)->capture_default_str();
  sy->add_option("--seed", sy_spec.seed, "PRNG seed")->capture_default_str();
  sy->add_option("--out-dir", sy_dir, "Output directory")->required();
  sy->callback([&] {
    action = [&] {
      for (const auto& s : sy_shapes) sy_spec.tensor_shapes.push_back(detail::parse_shape(s));
      const auto fam = generate(sy_spec);
      fs::create_directories(sy_dir);
      const fs::path dir(sy_dir);
      write_tmap(fam.pre, dir / "pre.tmap");
      Json files = Json::array();
      for (std::size_t t = 0; t < fam.fts.size(); ++t) {
        const auto name = fam.tasks[t] + ".tmap";
        write_tmap(fam.fts[t], dir / name);
        files.push_back(name);
      }
      detail::emit(Json{{"pre", "pre.tmap"}, {"fts", files}, {"seed", sy_spec.seed}}, "", out);
    };
  });

  // sweep
  auto* sw = app.add_subcommand("sweep", "RTVQ error over a base x offset bit grid, with and without error correction");
  std::string sw_pre, sw_out;
  std::vector<std::string> sw_ft;
  std::vector<int> sw_bb{2, 3, 4}, sw_bo{2, 3, 4};
  sw->add_option("--pre", sw_pre, "Pre-trained checkpoint (.tmap)")->required();
  sw->add_option("--ft", sw_ft, "Fine-tuned checkpoints (.tmap)")->required();
  sw->add_option("--b-base", sw_bb, "Base bit-widths")->delimiter(',')->check(bits_check)->capture_default_str();
  sw->add_option("--b-offset", sw_bo, "Offset bit-widths")->delimiter(',')->check(bits_check)->capture_default_str();
  sw->add_option("--out", sw_out, "Write JSON here instead of stdout");
  sw->callback([&] {
    action = [&] {
      const auto pre = read_tmap(sw_pre);
      const auto fts = detail::load_checkpoints(sw_ft);
      std::vector<std::pair<int, int>> grid;
      for (int bb : sw_bb) {
        for (int bo : sw_bo) grid.emplace_back(bb, bo);
      }
      const auto with_ec = compare_paths(pre, fts, {}, grid, true, threads);
      const auto without_ec = compare_paths(pre, fts, {}, grid, false, threads);
      Json rows = Json::array();
      for (std::size_t i = 0; i < grid.size(); ++i) {
        rows.push_back({{"b_base", grid[i].first},
                        {"b_offset", grid[i].second},
                        {"effective_bits", with_ec[i].effective_bits},
                        {"normalized_l2_ec", with_ec[i].normalized_l2},
                        {"normalized_l2_no_ec", without_ec[i].normalized_l2}});
      }
      detail::emit(rows, sw_out, out);
    };
  });

  std::vector<const char*> argv{"tvq"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    if (action) action();
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::Error& e) {
    app.exit(e, out, err);
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}

}  // namespace tvq::cli
