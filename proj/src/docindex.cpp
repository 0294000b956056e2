#include "dschecker/docindex.hpp"

#include "dschecker/dataset.hpp"
#include "dschecker/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>

namespace fs = std::filesystem;

namespace dschecker {

namespace {

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool is_dotted_suffix(std::string_view name, std::string_view suffix)
{
    return name.size() > suffix.size() && name.substr(name.size() - suffix.size()) == suffix &&
           name[name.size() - suffix.size() - 1] == '.';
}

LookupResult resolve(std::vector<const DocEntry*> hits)
{
    LookupResult r;
    if (hits.size() == 1) {
        r.status = LookupStatus::Found;
        r.entry = hits.front();
    } else if (hits.size() > 1) {
        r.status = LookupStatus::Ambiguous;
        r.candidates = std::move(hits);
    }
    return r;
}

}  // namespace

std::string_view to_string(LookupStatus status)
{
    switch (status) {
    case LookupStatus::Found: return "FOUND";
    case LookupStatus::NotFound: return "NOT_FOUND";
    case LookupStatus::Ambiguous: return "AMBIGUOUS";
    }
    return "NOT_FOUND";
}

bool api_names_match(std::string_view a, std::string_view b)
{
    if (a.empty() || b.empty())
        return false;
    return a == b || is_dotted_suffix(a, b) || is_dotted_suffix(b, a);
}

DocIndex DocIndex::load(const fs::path& root)
{
    const auto manifest = root / "index.json";
    if (!fs::is_regular_file(manifest))
        fail(ErrorCode::IndexSyntax, fmt::format("'{}' not found", manifest.string()));

    Json j;
    try {
        j = Json::parse(read_text_file(manifest));
    } catch (const Json::exception& e) {
        fail(ErrorCode::IndexSyntax, fmt::format("{}: {}", manifest.string(), e.what()));
    }
    if (!j.is_array())
        fail(ErrorCode::IndexSyntax, "index.json must be a list of entries");

    std::vector<DocEntry> entries;
    for (std::size_t i = 0; i < j.size(); ++i) {
        DocEntry e;
        try {
            const auto& item = j[i];
            item.at("library").get_to(e.library);
            item.at("api").get_to(e.api);
            item.at("file").get_to(e.file);
            for (const auto& d : item.value("directives", Json::array())) {
                Directive directive;
                directive.api = d.value("api", e.api);
                d.at("text").get_to(directive.text);
                if (d.contains("parameter") && !d["parameter"].is_null())
                    directive.parameter = d["parameter"].get<std::string>();
                if (d.contains("source_url") && !d["source_url"].is_null())
                    directive.source_url = d["source_url"].get<std::string>();
                e.directives.push_back(std::move(directive));
            }
        } catch (const Json::exception& ex) {
            fail(ErrorCode::IndexSyntax, fmt::format("index entry {}: {}", i, ex.what()));
        }
        const auto doc = root / e.file;
        if (!fs::is_regular_file(doc))
            fail(ErrorCode::MissingDocFile,
                 fmt::format("entry '{}' ({}) points to missing file '{}'", e.api, e.library, e.file));
        e.body = read_text_file(doc);
        entries.push_back(std::move(e));
    }
    return from_entries(std::move(entries));
}

DocIndex DocIndex::from_entries(std::vector<DocEntry> entries)
{
    DocIndex index;
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& e : entries) {
        if (e.library.empty() || e.api.empty())
            fail(ErrorCode::IndexSyntax, "index entries need a library and an api name");
        if (e.body.find_first_not_of(" \t\r\n") == std::string::npos)
            fail(ErrorCode::IndexSyntax, fmt::format("entry '{}' has an empty documentation body", e.api));
        for (const auto& d : e.directives)
            if (d.text.find_first_not_of(" \t\r\n") == std::string::npos)
                fail(ErrorCode::IndexSyntax, fmt::format("entry '{}' has an empty directive", e.api));
        if (!keys.emplace(e.library, e.api).second)
            fail(ErrorCode::DuplicateEntry, fmt::format("'{}' is listed twice for library '{}'", e.api, e.library));
        index.libraries_.insert(e.library);
    }
    index.entries_ = std::move(entries);
    return index;
}

LookupResult DocIndex::lookup(std::string_view api_name) const
{
    if (api_name.empty())
        return {};
    auto collect = [&](auto&& pred) {
        std::vector<const DocEntry*> hits;
        for (const auto& e : entries_)
            if (pred(e))
                hits.push_back(&e);
        return hits;
    };

    if (auto hits = collect([&](const DocEntry& e) { return e.api == api_name; }); !hits.empty())
        return resolve(std::move(hits));
    if (auto hits = collect([&](const DocEntry& e) { return is_dotted_suffix(e.api, api_name); }); !hits.empty())
        return resolve(std::move(hits));

    const auto wanted = lower(api_name);
    if (auto hits = collect([&](const DocEntry& e) { return lower(e.api) == wanted; }); !hits.empty())
        return resolve(std::move(hits));
    return resolve(collect([&](const DocEntry& e) { return is_dotted_suffix(lower(e.api), wanted); }));
}

std::vector<Directive> DocIndex::directives_for(std::string_view api_name) const
{
    auto r = lookup(api_name);
    return r.status == LookupStatus::Found ? r.entry->directives : std::vector<Directive>{};
}

}  // namespace dschecker
