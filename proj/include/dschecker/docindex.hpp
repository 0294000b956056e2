#pragma once

#include "dschecker/model.hpp"

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace dschecker {

struct DocEntry {
    std::string library;
    std::string api;   // canonical dotted name, e.g. "sklearn.impute.SimpleImputer"
    std::string file;  // relative to the index root
    std::string body;  // full documentation text
    std::vector<Directive> directives;
};

enum class LookupStatus { Found, NotFound, Ambiguous };

std::string_view to_string(LookupStatus status);

struct LookupResult {
    LookupStatus status = LookupStatus::NotFound;
    const DocEntry* entry = nullptr;          // set when Found
    std::vector<const DocEntry*> candidates;  // set when Ambiguous
};

/// A read-only documentation store: `root/index.json` lists entries and
/// `root/<file>` holds each body.
class DocIndex {
public:
    static DocIndex load(const std::filesystem::path& root);
    /// Builds an index from already-loaded entries (validated the same way).
    static DocIndex from_entries(std::vector<DocEntry> entries);

    /// Exact name, then dotted-suffix match, then the same two steps ignoring case.
    LookupResult lookup(std::string_view api_name) const;

    const std::vector<DocEntry>& entries() const noexcept { return entries_; }
    const std::set<std::string>& libraries() const noexcept { return libraries_; }
    bool knows_library(std::string_view library) const { return libraries_.count(std::string(library)) > 0; }

    /// Directives of the entry `api_name` resolves to; empty when it does not resolve uniquely.
    std::vector<Directive> directives_for(std::string_view api_name) const;

private:
    std::vector<DocEntry> entries_;
    std::set<std::string> libraries_;
};

/// True when one name is a dotted suffix of the other (or they are equal),
/// e.g. "SimpleImputer" and "sklearn.impute.SimpleImputer".
bool api_names_match(std::string_view a, std::string_view b);

}  // namespace dschecker
