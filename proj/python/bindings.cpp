#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "textddi/corpus.hpp"
#include "textddi/metrics.hpp"
#include "textddi/ppo.hpp"
#include "textddi/prompt.hpp"
#include "textddi/stats.hpp"
#include "textddi/synth.hpp"
#include "textddi/tokenizer.hpp"
#include "textddi/train.hpp"

namespace py = pybind11;
using namespace textddi;
using nlohmann::json;

namespace {

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::handle& obj) {
  if (obj.is_none()) return json::object();
  return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

PipelineConfig config_from(const py::object& cfg) {
  if (cfg.is_none()) return PipelineConfig::synth_benchmark();
  auto base = PipelineConfig::synth_benchmark().to_json();
  const auto patch = from_py(cfg);
  for (const auto& [key, value] : patch.items()) {
    if (!base.contains(key)) throw DataError("unknown config key '" + key + "'");
  }
  base.merge_patch(patch);
  return PipelineConfig::from_json(base);
}

py::dict report_dict(const MetricReport& r) { return to_py(r.to_json()).cast<py::dict>(); }

struct Run {
  Corpus corpus;
  DatasetSplit split;
  PipelineConfig cfg;
  PipelineResult result;
};

}  // namespace

PYBIND11_MODULE(_textddi, m) {
  m.doc() = "Token-budgeted prompt selection for drug-drug interaction prediction";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<InvariantError>(m, "InvariantError", PyExc_RuntimeError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("tokenize", &tokenize, py::arg("text"));
  m.def("token_count", &token_count, py::arg("text"));

  py::class_<Corpus>(m, "Corpus")
      .def_static("parse", &parse_corpus, py::arg("jsonl"))
      .def_static("load", &load_corpus, py::arg("path"))
      .def("to_jsonl", &corpus_to_jsonl)
      .def("save", &save_corpus, py::arg("path"))
      .def_property_readonly("num_drugs", [](const Corpus& c) { return c.drugs().size(); })
      .def_property_readonly("num_types", &Corpus::num_types)
      .def_property_readonly("num_triples", [](const Corpus& c) { return c.triples().size(); })
      .def_property_readonly("multilabel", &Corpus::multilabel)
      .def("drug_ids", [](const Corpus& c) {
        std::vector<std::string> ids;
        for (const auto& d : c.drugs()) ids.push_back(d.id);
        return ids;
      })
      .def("sentences", [](const Corpus& c, const std::string& id) {
        std::vector<std::string> out;
        for (const auto& s : c.drug(id).sentences) out.push_back(s.text);
        return out;
      }, py::arg("drug_id"))
      .def("triples", [](const Corpus& c) {
        std::vector<std::tuple<std::string, int, std::string, bool>> out;
        for (const auto& t : c.triples()) out.emplace_back(t.u, t.type, t.v, t.polarity == Polarity::positive);
        return out;
      });

  py::class_<DatasetSplit>(m, "Split")
      .def_readonly("d_tra", &DatasetSplit::d_tra)
      .def_readonly("d_val", &DatasetSplit::d_val)
      .def_readonly("d_tst", &DatasetSplit::d_tst)
      .def_readonly("s_tra", &DatasetSplit::s_tra)
      .def_readonly("s_val", &DatasetSplit::s_val)
      .def_readonly("s_tst", &DatasetSplit::s_tst)
      .def_readonly("warnings", &DatasetSplit::warnings)
      .def_property_readonly("mode", [](const DatasetSplit& s) { return to_string(s.mode); });

  m.def("make_split", [](const Corpus& corpus, const std::string& mode, double val, double tst, int k,
                         std::uint64_t seed) {
    SplitOptions o;
    o.mode = split_mode_from_string(mode);
    o.val_fraction = val;
    o.tst_fraction = tst;
    o.k = k;
    o.seed = seed;
    return make_split(corpus, o);
  }, py::arg("corpus"), py::arg("mode") = "zero_shot", py::arg("val") = 0.1, py::arg("tst") = 0.1,
        py::arg("k") = 1, py::arg("seed") = 0);
  m.def("check_split", &check_split_invariants, py::arg("corpus"), py::arg("split"));
  m.def("split_to_dict", [](const Corpus& c, const DatasetSplit& s) { return to_py(split_to_json(c, s)); });
  m.def("split_from_dict", [](const Corpus& c, const py::object& d) { return split_from_json(c, from_py(d)); });

  py::class_<SynthTruth>(m, "SynthTruth")
      .def_readonly("keywords", &SynthTruth::keywords)
      .def_readonly("keyword_type", &SynthTruth::keyword_type)
      .def_readonly("keyword_class", &SynthTruth::keyword_class)
      .def_readonly("signal_indices", &SynthTruth::signal_indices)
      .def("type_of", &SynthTruth::type_of, py::arg("class_u"), py::arg("class_v"))
      .def("to_dict", [](const SynthTruth& t) { return to_py(t.to_json()); });

  m.def("generate_synth", [](const py::object& config) {
    auto cfg = SynthConfig::from_json(from_py(config));
    auto s = generate(cfg);
    return py::make_tuple(std::move(s.corpus), std::move(s.truth));
  }, py::arg("config") = py::none(), "Synthetic corpus and its ground truth; config keys as in SynthConfig");
  m.def("synth_budget", [](const Corpus& corpus, const SynthTruth& truth, int n_sentences) {
    return synth_budget(SynthCorpus{corpus, truth}, n_sentences);
  }, py::arg("corpus"), py::arg("truth"), py::arg("n_sentences"));

  m.def("random_prompt", [](const Corpus& c, const std::string& u, const std::string& v, int budget,
                            std::uint64_t seed) {
    Rng rng(seed);
    return random_prompt(c.drug(u), c.drug(v), budget, rng).render();
  }, py::arg("corpus"), py::arg("u"), py::arg("v"), py::arg("budget"), py::arg("seed") = 0);
  m.def("corpus_stats", [](const Corpus& c, int bucket) { return to_py(corpus_stats(c, {}, bucket).summary()); },
        py::arg("corpus"), py::arg("bucket") = 64);

  m.def("default_config", [] { return to_py(PipelineConfig::synth_benchmark().to_json()); },
        "Synthetic-benchmark pipeline settings as a dict");

  py::class_<Run>(m, "Run")
      .def_property_readonly("best_round", [](const Run& r) { return r.result.best_round; })
      .def_property_readonly("history", [](const Run& r) {
        py::list out;
        for (const auto& rec : r.result.history) {
          py::dict d;
          d["round"] = rec.round;
          d["metric"] = rec.metric;
          d["val"] = report_dict(rec.val);
          d["mean_reward"] = rec.selector.mean_reward;
          d["entropy"] = rec.selector.entropy;
          out.append(d);
        }
        return out;
      })
      .def_property_readonly("trained_triples", [](const Run& r) { return r.result.trained_triples; })
      .def("evaluate", [](const Run& r, const std::string& mode, const std::string& part, std::uint64_t seed,
                          bool pretrained) {
        const auto& idx = part == "tra" ? r.split.s_tra : part == "val" ? r.split.s_val : r.split.s_tst;
        const auto m = eval_mode_from_string(mode);
        EvalOutput out;
        {
          py::gil_scoped_release release;
          out = evaluate(r.corpus, idx, pretrained ? r.result.pretrained : r.result.predictor,
                         &r.result.policy, m, r.cfg, seed);
        }
        py::dict d = report_dict(out.report);
        d["prompts"] = out.prompts;
        return d;
      }, py::arg("mode") = "selector", py::arg("part") = "tst", py::arg("seed") = 0, py::arg("pretrained") = false,
         "Scores the best-validation predictor, or the round-0 one with pretrained=True")
      .def("signal_rate", [](const Run& r, const SynthTruth& truth, std::uint64_t seed) {
        auto out = evaluate(r.corpus, r.split.s_tst, r.result.predictor, &r.result.policy,
                            EvalMode::selector, r.cfg, seed);
        return signal_selection_rate(out.episodes, truth);
      }, py::arg("truth"), py::arg("seed") = 0);

  m.def("run_pipeline", [](const Corpus& corpus, const DatasetSplit& split, const py::object& config,
                           const std::optional<std::filesystem::path>& run_dir) {
    Run r{corpus, split, config_from(config), {}};
    {
      py::gil_scoped_release release;
      r.result = run_pipeline(r.corpus, r.split, r.cfg, run_dir);
    }
    return r;
  }, py::arg("corpus"), py::arg("split"), py::arg("config") = py::none(), py::arg("run_dir") = py::none(),
        "Pretrain, then alternate selector and predictor rounds; config overrides the defaults");

  m.def("macro_f1", [](const std::vector<int>& p, const std::vector<int>& l, int n) { return macro_f1(p, l, n); },
        py::arg("predictions"), py::arg("labels"), py::arg("n_types"));
  m.def("accuracy", [](const std::vector<int>& p, const std::vector<int>& l) { return accuracy(p, l); });
  m.def("cohens_kappa", [](const std::vector<int>& p, const std::vector<int>& l, int n) { return cohens_kappa(p, l, n); });
  m.def("roc_auc", [](const std::vector<double>& s, const std::vector<int>& y) { return roc_auc(s, y); });
  m.def("pr_auc", [](const std::vector<double>& s, const std::vector<int>& y) { return pr_auc(s, y); });
  m.def("compute_gae", [](const std::vector<double>& rewards, const std::vector<double>& values, double gamma,
                          double lam) {
    auto g = compute_gae(rewards, values, gamma, lam);
    return py::make_tuple(g.advantages, g.returns);
  }, py::arg("rewards"), py::arg("values"), py::arg("gamma"), py::arg("lam"));
}
