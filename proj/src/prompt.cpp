#include "dschecker/prompt.hpp"

#include "dschecker/assets/prompt_template.hpp"
#include "dschecker/dataset.hpp"
#include "dschecker/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <sstream>

namespace fs = std::filesystem;

namespace dschecker {

namespace {

constexpr std::string_view kHeader = "#@ dschecker-prompt-template v";
constexpr std::string_view kSectionMarker = "#@ section ";

const char* const kRequiredSections[] = {
    "system",          "agent_system",   "task",         "fewshot_header",   "fewshot_example",
    "fewshot_answer",  "code",           "data_header",  "data_item",        "directive_header",
    "directive_item",  "directive_item_parameter",       "response_format",  "agent_nudge",
    "verdict_reprompt",
};

bool is_ident_start(char c)
{
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool is_ident_char(char c)
{
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

std::string strip_trailing_newlines(std::string_view text)
{
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r'))
        text.remove_suffix(1);
    return std::string(text);
}

std::string join(const std::vector<std::string>& parts, std::string_view sep)
{
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i)
            out += sep;
        out += parts[i];
    }
    return out;
}

std::string format_shape(const std::vector<std::int64_t>& shape)
{
    if (shape.size() == 1)
        return fmt::format("({},)", shape.front());
    return fmt::format("({})", fmt::join(shape, ", "));
}

bool wants_data(PromptVariant v)
{
    return v == PromptVariant::Data || v == PromptVariant::Full || v == PromptVariant::Fewshot;
}

bool wants_directives(PromptVariant v)
{
    return v == PromptVariant::Dir || v == PromptVariant::Full || v == PromptVariant::Fewshot;
}

using Values = std::map<std::string, std::string, std::less<>>;

}  // namespace

std::string_view to_string(PromptVariant variant)
{
    switch (variant) {
    case PromptVariant::Base: return "base";
    case PromptVariant::Data: return "data";
    case PromptVariant::Dir: return "dir";
    case PromptVariant::Full: return "full";
    case PromptVariant::Fewshot: return "fewshot";
    }
    return "base";
}

PromptVariant prompt_variant_from_string(std::string_view text)
{
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (auto v : {PromptVariant::Base, PromptVariant::Data, PromptVariant::Dir, PromptVariant::Full,
                   PromptVariant::Fewshot})
        if (lower == to_string(v))
            return v;
    fail(ErrorCode::ConfigSyntax, fmt::format("unknown prompt variant '{}'", text));
}

PromptTemplate PromptTemplate::parse(std::string_view text)
{
    PromptTemplate tmpl;
    std::istringstream in{std::string(text)};
    std::string line;
    std::string* current = nullptr;
    bool saw_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.rfind("#@", 0) == 0) {
            if (line.rfind(kHeader, 0) == 0) {
                try {
                    tmpl.version_ = std::stoi(line.substr(kHeader.size()));
                } catch (const std::exception&) {
                    fail(ErrorCode::TemplateSyntax, fmt::format("bad template header '{}'", line));
                }
                saw_header = true;
            } else if (line.rfind(kSectionMarker, 0) == 0) {
                auto name = line.substr(kSectionMarker.size());
                auto [it, inserted] = tmpl.sections_.emplace(name, std::string{});
                if (!inserted)
                    fail(ErrorCode::TemplateSyntax, fmt::format("section '{}' defined twice", name));
                current = &it->second;
            }
            continue;
        }
        if (!saw_header)
            fail(ErrorCode::TemplateSyntax, "template must start with a version header");
        if (!current) {
            if (line.find_first_not_of(" \t") != std::string::npos)
                fail(ErrorCode::TemplateSyntax, "text outside of any section");
            continue;
        }
        *current += line;
        *current += '\n';
    }
    if (!saw_header)
        fail(ErrorCode::TemplateSyntax, "missing version header");
    for (auto& [name, body] : tmpl.sections_)
        body = strip_trailing_newlines(body);
    for (const char* required : kRequiredSections)
        if (!tmpl.sections_.count(required))
            fail(ErrorCode::TemplateSyntax, fmt::format("missing section '{}'", required));
    return tmpl;
}

PromptTemplate PromptTemplate::load(const fs::path& path)
{
    return parse(read_text_file(path));
}

const PromptTemplate& PromptTemplate::builtin()
{
    static const PromptTemplate tmpl = parse(assets::builtin_prompt_template);
    return tmpl;
}

const std::string& PromptTemplate::section(std::string_view name) const
{
    auto it = sections_.find(name);
    if (it == sections_.end())
        fail(ErrorCode::TemplateSyntax, fmt::format("missing section '{}'", name));
    return it->second;
}

std::string substitute(std::string_view text, const Values& values, std::map<std::string, std::string>* applied,
                       std::string_view key_suffix)
{
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c != '$' || i + 1 == text.size()) {
            out += c;
            continue;
        }
        if (text[i + 1] == '$') {
            out += '$';
            ++i;
            continue;
        }
        if (!is_ident_start(text[i + 1])) {
            out += c;
            continue;
        }
        std::size_t end = i + 1;
        while (end < text.size() && is_ident_char(text[end]))
            ++end;
        auto name = text.substr(i + 1, end - i - 1);
        auto it = values.find(name);
        if (it == values.end())
            fail(ErrorCode::TemplateSyntax, fmt::format("no value for placeholder '${}'", name));
        out += it->second;
        if (applied)
            (*applied)[fmt::format("${}{}", name, key_suffix)] = it->second;
        i = end - 1;
    }
    return out;
}

std::vector<FewShotExemplar> parse_exemplars(std::string_view text)
{
    std::vector<FewShotExemplar> out;
    std::istringstream in{std::string(text)};
    std::string line;
    int yes = 0, no = 0, line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            auto j = Json::parse(line);
            FewShotExemplar ex;
            j.at("code").get_to(ex.code);
            j.at("library").get_to(ex.library);
            ex.data_section = j.value("data_section", std::string{});
            ex.directive_section = j.value("directive_section", std::string{});
            ex.expected_answer = j.at("expected_answer");
            auto correct = ex.expected_answer.at("correct").get<std::string>();
            if (correct == "yes") {
                ++yes;
            } else if (correct == "no") {
                ++no;
                if (ex.expected_answer.value("patch", "").empty() ||
                    ex.expected_answer.value("explanation", "").empty())
                    fail(ErrorCode::ConfigSyntax, fmt::format("exemplar line {}: \"no\" answer needs patch and "
                                                              "explanation", line_no));
            } else {
                fail(ErrorCode::ConfigSyntax, fmt::format("exemplar line {}: correct must be yes/no", line_no));
            }
            out.push_back(std::move(ex));
        } catch (const Json::exception& e) {
            fail(ErrorCode::ConfigSyntax, fmt::format("exemplar line {}: {}", line_no, e.what()));
        }
    }
    if (out.size() != 2 || yes != 1 || no != 1)
        fail(ErrorCode::ConfigSyntax,
             fmt::format("exemplar store must hold one correct and one incorrect example (found {} yes, {} no)",
                         yes, no));
    return out;
}

std::vector<FewShotExemplar> load_exemplars(const fs::path& path)
{
    if (!fs::is_regular_file(path))
        fail(ErrorCode::FewshotWithoutExemplars, fmt::format("exemplar store '{}' not found", path.string()));
    return parse_exemplars(read_text_file(path));
}

std::string render_data_body(const DataInfo& info)
{
    std::vector<std::string> lines;
    lines.push_back(fmt::format("Type: {}", info.type_name));
    if (const auto* frame = std::get_if<FrameDetail>(&info.detail)) {
        lines.push_back(fmt::format("Rows: {}", frame->row_count));
        lines.push_back("Columns (name: dtype, non-null count):");
        for (const auto& c : frame->columns)
            lines.push_back(fmt::format("- {}: {}, {} non-null", c.name, c.dtype, c.non_null));
        if (!frame->sample_rows.empty()) {
            std::vector<std::string> names;
            for (const auto& c : frame->columns)
                names.push_back(c.name);
            lines.push_back(fmt::format("Sample rows (first {}; index, {}):", frame->sample_rows.size(),
                                        fmt::join(names, ", ")));
            for (const auto& row : frame->sample_rows)
                lines.push_back(row);
        }
    } else if (const auto* array = std::get_if<ArrayDetail>(&info.detail)) {
        lines.push_back(fmt::format("Shape: {}", format_shape(array->shape)));
        lines.push_back(fmt::format("Dtype: {}", array->dtype));
    } else if (const auto* seq = std::get_if<SequenceDetail>(&info.detail)) {
        lines.push_back(fmt::format("Length: {}", seq->length));
    }
    return join(lines, "\n");
}

std::string render_data_section(const DataInfo& info, const PromptTemplate& tmpl)
{
    Values values{{"variable", info.target.variable_name},
                  {"linenum", std::to_string(info.target.line_number)},
                  {"data", render_data_body(info)}};
    return substitute(tmpl.section("data_item"), values);
}

PromptBundle render(PromptVariant variant, const SnippetRecord& record, std::span<const DataInfo> data_infos,
                    std::span<const FewShotExemplar> exemplars, const PromptTemplate& tmpl)
{
    if (record.source.find_first_not_of(" \t\r\n") == std::string::npos)
        fail(ErrorCode::EmptySnippet, fmt::format("record '{}' has an empty snippet", record.id));
    if (variant == PromptVariant::Fewshot && exemplars.empty())
        fail(ErrorCode::FewshotWithoutExemplars, "the few-shot variant needs exemplars");

    PromptBundle bundle;
    bundle.variant = variant;
    auto* applied = &bundle.substitutions;
    const Values base{{"lib", record.library}, {"code", strip_trailing_newlines(record.source)}};

    bundle.system_text = substitute(tmpl.section("system"), base, applied);

    std::vector<std::string> blocks;
    blocks.push_back(substitute(tmpl.section("task"), base, applied));

    if (variant == PromptVariant::Fewshot) {
        blocks.push_back(substitute(tmpl.section("fewshot_header"), base, applied));
        for (std::size_t i = 0; i < exemplars.size(); ++i) {
            const auto& ex = exemplars[i];
            const auto key = fmt::format("#example{}", i + 1);
            Values values{{"index", std::to_string(i + 1)},
                          {"lib", ex.library},
                          {"code", strip_trailing_newlines(ex.code)},
                          {"answer", ex.expected_answer.dump()}};
            blocks.push_back(substitute(tmpl.section("fewshot_example"), values, applied, key));
            if (!ex.data_section.empty())
                blocks.push_back(strip_trailing_newlines(ex.data_section));
            if (!ex.directive_section.empty())
                blocks.push_back(strip_trailing_newlines(ex.directive_section));
            blocks.push_back(substitute(tmpl.section("fewshot_answer"), values, applied, key));
        }
    }

    blocks.push_back(substitute(tmpl.section("code"), base, applied));

    if (wants_data(variant) && !data_infos.empty()) {
        std::vector<DataInfo> ordered(data_infos.begin(), data_infos.end());
        std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
            return std::tie(a.target.line_number, a.target.variable_name) <
                   std::tie(b.target.line_number, b.target.variable_name);
        });
        blocks.push_back(substitute(tmpl.section("data_header"), base, applied));
        for (std::size_t i = 0; i < ordered.size(); ++i) {
            const auto& info = ordered[i];
            Values values{{"variable", info.target.variable_name},
                          {"linenum", std::to_string(info.target.line_number)},
                          {"data", render_data_body(info)}};
            blocks.push_back(substitute(tmpl.section("data_item"), values, applied, fmt::format("#{}", i + 1)));
        }
    }

    if (wants_directives(variant) && !record.directives.empty()) {
        blocks.push_back(substitute(tmpl.section("directive_header"), base, applied));
        std::vector<std::string> items;
        for (std::size_t i = 0; i < record.directives.size(); ++i) {
            const auto& d = record.directives[i];
            Values values{{"api", d.api.empty() ? record.target_api : d.api}, {"directive", d.text}};
            std::string_view section = "directive_item";
            if (d.parameter && !d.parameter->empty()) {
                values["parameter"] = *d.parameter;
                section = "directive_item_parameter";
            }
            auto item = substitute(tmpl.section(section), values, applied, fmt::format("#{}", i + 1));
            items.push_back(record.directives.size() > 1 ? fmt::format("{}. {}", i + 1, item) : item);
        }
        blocks.push_back(join(items, "\n"));
    }

    blocks.push_back(substitute(tmpl.section("response_format"), base, applied));
    bundle.user_text = join(blocks, "\n\n") + "\n";
    return bundle;
}

PromptBundle render_agent_prompt(const SnippetRecord& record, const PromptTemplate& tmpl)
{
    auto bundle = render(PromptVariant::Base, record, {}, {}, tmpl);
    bundle.system_text =
        substitute(tmpl.section("agent_system"), Values{{"lib", record.library}}, &bundle.substitutions);
    return bundle;
}

}  // namespace dschecker
