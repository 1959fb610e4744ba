#include "treegen/bench.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <zlib.h>

#include "treegen/errors.hpp"

namespace treegen {

namespace {

bool looks_gzipped(const std::string& bytes) {
    return bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1f &&
           static_cast<unsigned char>(bytes[1]) == 0x8b;
}

std::string gunzip(const std::string& bytes) {
    z_stream stream{};
    if (inflateInit2(&stream, 16 + MAX_WBITS) != Z_OK) throw Error("zlib init failed");
    std::string out;
    char buffer[64 * 1024];
    stream.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
    stream.avail_in = static_cast<uInt>(bytes.size());
    int rc = Z_OK;
    do {
        stream.next_out = reinterpret_cast<Bytef*>(buffer);
        stream.avail_out = sizeof(buffer);
        rc = inflate(&stream, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&stream);
            throw Error("gzip decompression failed (zlib rc " + std::to_string(rc) + ")");
        }
        out.append(buffer, sizeof(buffer) - stream.avail_out);
    } while (rc != Z_STREAM_END && stream.avail_in > 0);
    inflateEnd(&stream);
    if (rc != Z_STREAM_END) throw Error("gzip stream truncated");
    return out;
}

std::string require_field(const nlohmann::json& j, const char* field, std::size_t line_no) {
    if (!j.contains(field) || !j[field].is_string()) throw MissingField(line_no, field);
    return j[field].get<std::string>();
}

}  // namespace

std::vector<BenchTask> load_tasks(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open benchmark file: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    std::string bytes = buffer.str();
    if (looks_gzipped(bytes)) bytes = gunzip(bytes);

    std::vector<BenchTask> tasks;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= bytes.size()) {
        std::size_t end = bytes.find('\n', start);
        if (end == std::string::npos) end = bytes.size();
        std::string line = bytes.substr(start, end - start);
        ++line_no;
        const std::size_t next = end + 1;
        start = next;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) {
            if (end == bytes.size()) break;
            continue;
        }
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw MalformedRecord(line_no, "not valid JSON");
        if (!j.is_object()) throw MalformedRecord(line_no, "record is not an object");

        BenchTask task;
        task.task_id = require_field(j, "task_id", line_no);
        task.prompt = require_field(j, "prompt", line_no);
        task.entry_point = require_field(j, "entry_point", line_no);
        task.test_source = require_field(j, "test", line_no);
        task.canonical_solution = require_field(j, "canonical_solution", line_no);
        if (task.prompt.find(task.entry_point) == std::string::npos)
            throw MalformedRecord(line_no, "entry_point '" + task.entry_point +
                                               "' does not occur in prompt");
        tasks.push_back(std::move(task));
        if (end == bytes.size()) break;
    }
    return tasks;
}

double pass_at_k(const EvalCounts& counts) {
    if (counts.n < 1 || counts.c < 0 || counts.c > counts.n || counts.k < 1 ||
        counts.k > counts.n)
        throw DomainError("pass_at_k needs 0 <= c <= n and 1 <= k <= n, got n=" +
                          std::to_string(counts.n) + " c=" + std::to_string(counts.c) +
                          " k=" + std::to_string(counts.k));
    if (counts.k == 1) return static_cast<double>(counts.c) / counts.n;
    if (counts.c == 0) return 0.0;
    if (counts.n - counts.c < counts.k) return 1.0;
    // 1 - prod_{i=n-c+1..n} (1 - k/i), the overflow-free form of
    // 1 - C(n-c,k)/C(n,k).
    double failure = 1.0;
    for (int i = counts.n - counts.c + 1; i <= counts.n; ++i)
        failure *= 1.0 - static_cast<double>(counts.k) / i;
    return 1.0 - failure;
}

Comparison compare_pass_rates(double baseline_pass, double framework_pass) {
    if (baseline_pass < 0 || baseline_pass > 1 || framework_pass < 0 || framework_pass > 1)
        throw DomainError("pass rates must lie in [0, 1]");
    if (baseline_pass == 0)
        throw DomainError("relative improvement is undefined for a zero baseline");
    Comparison cmp;
    cmp.baseline_pass = baseline_pass;
    cmp.framework_pass = framework_pass;
    cmp.relative_improvement_percent = 100.0 * (framework_pass - baseline_pass) / baseline_pass;
    cmp.absolute_improvement_points = 100.0 * (framework_pass - baseline_pass);
    return cmp;
}

const char* bench_mode_name(BenchMode mode) {
    return mode == BenchMode::one_shot ? "one_shot" : "guided";
}

namespace {

BenchReport::PerTask evaluate_task(const BenchTask& task, Orchestrator& orchestrator,
                                   const Sandbox& sandbox, const BenchRunOptions& options) {
    BenchReport::PerTask result;
    result.task_id = task.task_id;
    result.n = options.samples_per_task;

    for (int sample = 0; sample < options.samples_per_task; ++sample) {
        std::optional<std::string> program;
        std::string generation_failure;
        int calls_this_sample = 0;

        if (options.mode == BenchMode::one_shot) {
            Orchestrator::RunState state;
            try {
                program = orchestrator.one_shot(task.prompt, task.entry_point, state).source;
            } catch (const ModelRefusal& e) {
                generation_failure = e.what();
            } catch (const NoCodeBlock& e) {
                generation_failure = e.what();
            } catch (const NoFunctionDefinition& e) {
                generation_failure = e.what();
            } catch (const NameMismatch& e) {
                generation_failure = e.what();
            } catch (const BudgetExhausted& e) {
                generation_failure = e.what();
            }
            calls_this_sample = static_cast<int>(state.call_log.size());
        } else {
            TaskSpec spec;
            spec.task_id = task.task_id;
            spec.description = task.prompt;
            spec.entry_point = task.entry_point;
            SolveOutcome outcome = orchestrator.solve_task(spec);
            calls_this_sample = static_cast<int>(outcome.call_log.size());
            if (outcome.status == SolveStatus::solved)
                program = outcome.final_program;
            else
                generation_failure = solve_status_name(outcome.status);
        }

        result.llm_calls += calls_this_sample;

        if (program) {
            TestReport eval = sandbox.execute_candidate(
                *program, task.test_source, task.entry_point,
                orchestrator.options().limits);
            if (eval.status == RunStatus::pass) ++result.c;
            result.report = eval;
            result.status = run_status_name(eval.status);
        } else {
            TestReport eval;
            eval.status = RunStatus::error;
            eval.stderr_excerpt = "no candidate program: " + generation_failure;
            result.report = eval;
            result.status = "no_candidate";
        }
    }
    return result;
}

}  // namespace

BenchReport run_benchmark(const std::vector<BenchTask>& tasks, Orchestrator& orchestrator,
                          const Sandbox& sandbox, const BenchRunOptions& options) {
    if (options.samples_per_task < 1) throw DomainError("samples_per_task must be positive");
    BenchReport report;
    report.mode = options.mode;
    report.per_task.resize(tasks.size());

    const int jobs = std::max(1, options.jobs);
    if (jobs == 1 || tasks.size() <= 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i)
            report.per_task[i] = evaluate_task(tasks[i], orchestrator, sandbox, options);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> faults(static_cast<std::size_t>(jobs));
        std::vector<std::thread> workers;
        for (int w = 0; w < jobs; ++w) {
            workers.emplace_back([&, w] {
                try {
                    while (true) {
                        const std::size_t i = next.fetch_add(1);
                        if (i >= tasks.size()) break;
                        report.per_task[i] =
                            evaluate_task(tasks[i], orchestrator, sandbox, options);
                    }
                } catch (...) {
                    faults[static_cast<std::size_t>(w)] = std::current_exception();
                    next.store(tasks.size());  // stop the other workers soon
                }
            });
        }
        for (auto& worker : workers) worker.join();
        for (const auto& fault : faults)
            if (fault) std::rethrow_exception(fault);
    }

    double sum = 0;
    for (const auto& task : report.per_task)
        sum += pass_at_k({task.n, task.c, 1});
    report.pass_at_1 = report.per_task.empty() ? 0.0 : sum / report.per_task.size();
    return report;
}

nlohmann::json report_to_json(const BenchReport& report) {
    nlohmann::json per_task = nlohmann::json::array();
    for (const auto& task : report.per_task) {
        per_task.push_back({{"task_id", task.task_id},
                            {"status", task.status},
                            {"llm_calls", task.llm_calls},
                            {"n", task.n},
                            {"c", task.c},
                            {"eval_status", run_status_name(task.report.status)},
                            {"failing_assertion",
                             task.report.failing_assertion ? nlohmann::json(*task.report.failing_assertion)
                                                           : nlohmann::json(nullptr)}});
    }
    nlohmann::json doc;
    doc["mode"] = bench_mode_name(report.mode);
    doc["pass_at_1"] = report.pass_at_1;
    doc["tasks"] = report.per_task.size();
    doc["per_task"] = per_task;
    if (report.comparison) {
        doc["comparison"] = {
            {"baseline_pass", report.comparison->baseline_pass},
            {"framework_pass", report.comparison->framework_pass},
            {"relative_improvement_percent", report.comparison->relative_improvement_percent},
            {"absolute_improvement_points", report.comparison->absolute_improvement_points}};
    }
    return doc;
}

namespace {

std::string percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", fraction * 100.0);
    return buf;
}

}  // namespace

std::string report_summary_table(const BenchReport& one_shot, const BenchReport& guided) {
    std::string out;
    out += "method                     pass@1\n";
    out += "-------------------------  ------\n";
    out += "one-shot generation        " + percent(one_shot.pass_at_1) + "\n";
    out += "guided decomposition       " + percent(guided.pass_at_1) + "\n";
    if (one_shot.pass_at_1 > 0) {
        Comparison cmp = compare_pass_rates(one_shot.pass_at_1, guided.pass_at_1);
        char buf[128];
        std::snprintf(buf, sizeof(buf),
                      "improvement: %+.2f%% relative, %+.1f points absolute\n",
                      cmp.relative_improvement_percent, cmp.absolute_improvement_points);
        out += buf;
    }
    return out;
}

}  // namespace treegen
