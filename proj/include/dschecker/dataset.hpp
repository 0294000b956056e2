#pragma once

#include "dschecker/model.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dschecker {

/// An immutable, validated benchmark set. Record paths are relative to `root`.
struct Dataset {
    std::filesystem::path root;
    std::vector<SnippetRecord> records;

    std::filesystem::path resolve(const std::string& relative) const { return root / relative; }
    const SnippetRecord* find(std::string_view id) const;
    std::size_t misuse_count() const;
    bool operator==(const Dataset&) const = default;
};

/// Loads a line-delimited JSON manifest. Either every record is valid or the
/// first offending record is reported; there is no partial result.
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Same as load_dataset but from in-memory text; files are resolved under `root`.
Dataset parse_dataset(std::string_view manifest_text, const std::filesystem::path& root);

/// One JSON object per line, records in dataset order.
std::string serialize_dataset(const Dataset& dataset);

/// Checks every SnippetRecord invariant; `record.source` must already be loaded.
void validate_record(const SnippetRecord& record, const std::filesystem::path& root);

std::size_t line_count(std::string_view text);

/// True if `name` appears in `source` delimited by non-identifier characters.
bool identifier_occurs(std::string_view source, std::string_view name);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace dschecker
