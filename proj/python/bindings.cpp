#include "dschecker/dataset.hpp"
#include "dschecker/error.hpp"
#include "dschecker/evaluate.hpp"
#include "dschecker/metrics.hpp"
#include "dschecker/patch.hpp"
#include "dschecker/prompt.hpp"
#include "dschecker/stats.hpp"
#include "dschecker/verdict.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fmt/format.h>

namespace py = pybind11;
using namespace dschecker;

namespace {

// Structured values cross the boundary as JSON text; the Python package decodes them.

std::string render_prompt(const std::string& variant, const std::string& manifest, const std::string& record_id,
                          const std::string& exemplars)
{
    auto dataset = load_dataset(manifest);
    const auto* record = dataset.find(record_id);
    if (!record)
        fail(ErrorCode::InvariantViolation, fmt::format("no record '{}' in '{}'", record_id, manifest));
    std::vector<FewShotExemplar> shots;
    if (!exemplars.empty())
        shots = load_exemplars(exemplars);
    auto bundle = render(prompt_variant_from_string(variant), *record, record->recorded_data, shots);
    return Json{{"system", bundle.system_text}, {"user", bundle.user_text}}.dump();
}

std::string verdict_json(const std::string& text)
{
    auto v = parse_verdict(text);
    return verdict_contract_json(v).dump();
}

std::pair<std::vector<double>, std::vector<double>> run_bootstrap(
    const std::vector<std::tuple<bool, bool, bool, bool>>& scores, std::size_t sample_size, std::size_t resamples,
    std::uint64_t seed, bool with_replacement)
{
    std::vector<RecordScore> population;
    for (const auto& [misuse, flagged, tp, fixed] : scores)
        population.push_back({misuse, flagged, tp, fixed});
    auto out = bootstrap(population, {sample_size, resamples, with_replacement}, seed, {sample_f1, sample_fix_rate});
    return {out[0], out[1]};
}

std::string dunn_json(const std::vector<std::vector<double>>& groups)
{
    Json out = Json::array();
    for (const auto& c : dunn_test(groups))
        out.push_back({{"i", c.i},
                       {"j", c.j},
                       {"z", c.z},
                       {"p_raw", c.p_raw},
                       {"p_adjusted", c.p_adjusted},
                       {"significant", c.significant}});
    return out.dump();
}

std::pair<std::string, std::string> run_eval(const std::string& dataset_path, const std::string& config_path,
                                             std::uint64_t seed, std::size_t jobs, const std::string& adjudications,
                                             const std::string& mode)
{
    auto dataset = load_dataset(dataset_path);
    auto config = load_eval_config(config_path);
    EvalOptions options;
    options.seed = seed;
    options.jobs = jobs;
    if (!adjudications.empty())
        options.adjudication = load_adjudication(adjudications);
    if (!mode.empty())
        options.adjudication_mode = adjudication_mode_from_string(mode);
    auto report = evaluate(dataset, config, options);
    return {report_to_json(report).dump(2) + "\n", render_report_table(report)};
}

}  // namespace

PYBIND11_MODULE(_dschecker, m)
{
    m.doc() = "LLM-based API misuse detection for data-science Python code";

    // The error type carries `code` (e.g. "HUNK_MISMATCH") and `detail` attributes.
    PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
    error_type.call_once_and_store_result([&] { return py::object(py::exception<Error>(m, "DscheckerError")); });
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p)
                std::rethrow_exception(p);
        } catch (const Error& e) {
            const auto& type = error_type.get_stored();
            py::object value = type(e.what());
            value.attr("code") = std::string(to_string(e.code()));
            value.attr("detail") = e.detail();
            PyErr_SetObject(type.ptr(), value.ptr());
        }
    });

    m.def("load_dataset_jsonl", [](const std::string& path) { return serialize_dataset(load_dataset(path)); },
          py::arg("manifest"), "Validated dataset re-serialized as JSON lines");
    m.def("render_prompt_json", &render_prompt, py::arg("variant"), py::arg("manifest"), py::arg("record_id"),
          py::arg("exemplars") = "");
    m.def("parse_verdict_json", &verdict_json, py::arg("text"));
    m.def("apply_patch", py::overload_cast<std::string_view, std::string_view, int>(&apply_patch),
          py::arg("original"), py::arg("diff"), py::arg("fuzz") = kDefaultPatchFuzz);
    m.def("reverse_patch", &reverse_patch, py::arg("diff"));
    m.def(
        "detection_metrics",
        [](std::size_t tp, std::size_t flagged, std::size_t total_misuses) {
            auto r = detection_metrics({tp, flagged, total_misuses, total_misuses});
            return std::make_tuple(r.precision, r.recall, r.f1);
        },
        py::arg("tp"), py::arg("flagged"), py::arg("total_misuses"));
    m.def("fix_rate", &fix_rate, py::arg("correct_patches"), py::arg("total_misuses"));
    m.def(
        "shapiro_wilk",
        [](const std::vector<double>& xs) {
            auto r = shapiro_wilk(xs);
            return std::make_pair(r.w, r.p);
        },
        py::arg("xs"));
    m.def("dunn_test_json", &dunn_json, py::arg("groups"));
    m.def("bootstrap", &run_bootstrap, py::arg("scores"), py::arg("sample_size") = 20, py::arg("resamples") = 50,
          py::arg("seed") = 0, py::arg("with_replacement") = true,
          "scores: (is_misuse, flagged, true_positive, fixed) per record; returns (f1 values, fix rates)");
    m.def("evaluate", &run_eval, py::arg("dataset"), py::arg("configs"), py::arg("seed") = 0, py::arg("jobs") = 1,
          py::arg("adjudications") = "", py::arg("adjudication_mode") = "",
          py::call_guard<py::gil_scoped_release>(), "Returns (report JSON, text table)");
    m.def(
        "exit_code",
        [](const std::string& code) {
            for (int c = 0; c <= static_cast<int>(ErrorCode::GroupTooSmall); ++c)
                if (to_string(static_cast<ErrorCode>(c)) == code)
                    return exit_code(static_cast<ErrorCode>(c));
            throw py::value_error(fmt::format("unknown error code '{}'", code));
        },
        py::arg("code"), "CLI exit status for an error code such as \"HUNK_MISMATCH\"");
}
