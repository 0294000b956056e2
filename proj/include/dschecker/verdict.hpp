#pragma once

#include "dschecker/error.hpp"
#include "dschecker/model.hpp"

#include <string_view>

namespace dschecker {

enum class VerdictFailure {
    NoJsonObject,
    InvalidJson,
    MissingCorrect,
    InvalidCorrect,
    MissingPatch,
    MissingExplanation,
};

std::string_view to_string(VerdictFailure reason);

/// MALFORMED_VERDICT with a machine-readable reason, used to word the reprompt.
class MalformedVerdict : public Error {
public:
    MalformedVerdict(VerdictFailure reason, const std::string& detail);
    VerdictFailure reason() const noexcept { return reason_; }

private:
    VerdictFailure reason_;
};

/// Extracts the first balanced JSON object from model output (fences and
/// surrounding prose are ignored) and checks it against the response
/// contract. Throws MalformedVerdict; never anything else.
Verdict parse_verdict(std::string_view raw);

}  // namespace dschecker
