#pragma once

#include "dschecker/dataset.hpp"
#include "dschecker/error.hpp"
#include "dschecker/gateway.hpp"
#include "dschecker/runtime.hpp"

#include <doctest.h>
#include <fmt/format.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <unistd.h>

namespace test {

namespace fs = std::filesystem;
using namespace dschecker;

inline fs::path source_dir()
{
    return DSCHECKER_SOURCE_DIR;
}

inline fs::path smoke_dir()
{
    return source_dir() / "data" / "smoke";
}

inline fs::path docs_dir()
{
    return source_dir() / "data" / "docs";
}

inline fs::path fixture(const std::string& relative)
{
    return source_dir() / "tests" / "fixtures" / relative;
}

inline const std::string kMisuseId = "imputer-drops-empty-column";
inline const std::string kCorrectId = "imputer-constant-fill";

inline const Dataset& smoke_dataset()
{
    static const Dataset d = load_dataset(smoke_dir() / "manifest.jsonl");
    return d;
}

inline const SnippetRecord& smoke_record(const std::string& id)
{
    return *smoke_dataset().find(id);
}

inline std::string imputer_patch()
{
    return "--- a/snippet.py\n+++ b/snippet.py\n@@ -6 +6 @@\n"
           "-imp = SimpleImputer(missing_values=np.nan, strategy=\"mean\")\n"
           "+imp = SimpleImputer(missing_values=np.nan, strategy=\"constant\", fill_value=1)\n";
}

/// A fresh directory removed at scope exit.
class TempDir {
public:
    TempDir()
    {
        std::string pattern = (fs::temp_directory_path() / "dschecker-test-XXXXXX").string();
        if (!mkdtemp(pattern.data()))
            throw std::runtime_error("mkdtemp failed");
        path_ = pattern;
    }
    ~TempDir()
    {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

    fs::path write(const std::string& name, std::string_view text) const
    {
        const auto p = path_ / name;
        fs::create_directories(p.parent_path());
        std::ofstream out(p, std::ios::binary);
        out << text;
        return p;
    }

private:
    fs::path path_;
};

inline ModelTurn final_turn(std::string text)
{
    ModelTurn t;
    t.final_text = std::move(text);
    return t;
}

inline ModelTurn call_turn(std::vector<ToolCall> calls)
{
    ModelTurn t;
    t.tool_calls = std::move(calls);
    return t;
}

/// Answers with a callback and remembers what it was asked.
class ScriptedProvider : public ChatProvider {
public:
    using Script = std::function<ModelTurn(const std::string&, const std::vector<ChatMessage>&,
                                           const std::vector<ToolDeclaration>&)>;

    explicit ScriptedProvider(Script script) : script_(std::move(script)) {}

    ModelTurn complete(const std::string& id, const std::vector<ChatMessage>& conversation,
                       const std::vector<ToolDeclaration>& tools, const GenerationParams&) override
    {
        std::lock_guard lock(mutex_);
        ++calls;
        offered_tools.push_back(tools.size());
        last_conversation = conversation;
        return script_(id, conversation, tools);
    }

    int calls = 0;
    std::vector<std::size_t> offered_tools;
    std::vector<ChatMessage> last_conversation;

private:
    std::mutex mutex_;
    Script script_;
};

/// Returns canned runs; counts requests per mode.
class FakeExecutor : public Executor {
public:
    using Handler = std::function<RawRun(const ExecRequest&)>;
    explicit FakeExecutor(Handler handler) : handler_(std::move(handler)) {}

    RawRun execute(const ExecRequest& request) override
    {
        std::lock_guard lock(mutex_);
        ++by_mode[request.mode];
        requests.push_back(request);
        return handler_(request);
    }

    std::map<ExecMode, int> by_mode;
    std::vector<ExecRequest> requests;

private:
    std::mutex mutex_;
    Handler handler_;
};

inline RawRun raw_ok(std::string out = "")
{
    RawRun r;
    r.stdout_text = std::move(out);
    return r;
}

inline RawRun raw_error(const std::string& traceback_tail, int code = 1)
{
    RawRun r;
    r.exit_code = code;
    r.stderr_text = "Traceback (most recent call last):\n  File \"snippet.py\", line 8, in <module>\n" + traceback_tail;
    return r;
}

inline bool have_python()
{
    return std::system("python3 -c 'import sys' >/dev/null 2>&1") == 0;
}

inline bool have_python_with(const std::string& modules)
{
    return std::system(("python3 -c 'import " + modules + "' >/dev/null 2>&1").c_str()) == 0;
}

template <typename F>
ErrorCode error_code_of(F&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected a dschecker::Error");
    return ErrorCode::InvariantViolation;
}

}  // namespace test
