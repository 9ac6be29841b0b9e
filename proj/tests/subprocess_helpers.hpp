#pragma once

// Process envelope for tests that drive the CLI binaries end to end.
// POSIX-only, which matches the supported platforms of the test suite.

#include <sys/types.h>
#include <sys/wait.h>

#include <httplib.h>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

#ifndef TRAJFORGE_CLI_BIN
#define TRAJFORGE_CLI_BIN "trajforge"
#endif
#ifndef TRAJFORGE_MOCK_BIN
#define TRAJFORGE_MOCK_BIN "trajforge-mock-judge"
#endif

namespace testutil {

struct CommandResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Runs through the shell with stdout/stderr captured into temp files.
inline CommandResult run_command(const std::string& command) {
    static int counter = 0;
    const std::string tag = std::to_string(getpid()) + "_" + std::to_string(++counter);
    const std::string out_path = "/tmp/trajforge_cmd_out_" + tag;
    const std::string err_path = "/tmp/trajforge_cmd_err_" + tag;
    const std::string full = command + " >" + out_path + " 2>" + err_path;
    const int status = std::system(full.c_str());
    CommandResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = slurp(out_path);
    result.err = slurp(err_path);
    std::remove(out_path.c_str());
    std::remove(err_path.c_str());
    return result;
}

inline std::string cli_bin() { return TRAJFORGE_CLI_BIN; }
inline std::string mock_bin() { return TRAJFORGE_MOCK_BIN; }

inline int pick_port(int offset) {
    return 21000 + static_cast<int>(getpid() % 9000) + offset;
}

// Launches the mock judge and tears it down on destruction.
class MockJudge {
  public:
    MockJudge(int port, const std::string& script_path) : port_(port) {
        pid_ = fork();
        if (pid_ == 0) {
            std::string port_str = std::to_string(port);
            std::vector<const char*> argv = {TRAJFORGE_MOCK_BIN, "--port", port_str.c_str()};
            if (!script_path.empty()) {
                argv.push_back("--script");
                argv.push_back(script_path.c_str());
            }
            argv.push_back(nullptr);
            execv(TRAJFORGE_MOCK_BIN, const_cast<char* const*>(argv.data()));
            _exit(127);
        }
    }

    ~MockJudge() {
        if (pid_ > 0) {
            kill(pid_, SIGTERM);
            int status = 0;
            waitpid(pid_, &status, 0);
        }
    }

    // Polls the health endpoint until the server answers.
    bool wait_ready(int attempts = 100) const {
        for (int i = 0; i < attempts; ++i) {
            httplib::Client probe("127.0.0.1", port_);
            probe.set_connection_timeout(1, 0);
            if (probe.Get("/healthz")) {
                return true;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
        return false;
    }

    std::string endpoint() const {
        return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
    }

  private:
    pid_t pid_ = -1;
    int port_;
};

}  // namespace testutil
