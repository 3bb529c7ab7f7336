#include "crisisvit/crawler.hpp"

#include "httplib.h"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace crisisvit {

namespace {

struct ParsedUrl {
    std::string scheme_host_port;  // "http://host:port"
    std::string host;
    std::string path;
};

ParsedUrl parse_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw std::invalid_argument("no scheme");
    const auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl p;
    p.scheme_host_port = url.substr(0, path_start);
    std::string authority = url.substr(scheme_end + 3, path_start == std::string::npos ? std::string::npos
                                                                                     : path_start - scheme_end - 3);
    p.host = authority.substr(0, authority.find(':'));
    p.path = path_start == std::string::npos ? "/" : url.substr(path_start);
    return p;
}

std::string host_of(const std::string& url) {
    try {
        return parse_url(url).host;
    } catch (const std::exception&) {
        return {};
    }
}

/// Spaces requests to the same host at least 1/rate seconds apart.
class HostRateLimiter {
public:
    explicit HostRateLimiter(double rate) : interval_(rate > 0 ? 1.0 / rate : 0.0) {}

    void acquire(const std::string& host) {
        if (interval_ <= 0) return;
        std::chrono::steady_clock::time_point slot;
        {
            std::lock_guard lock(mutex_);
            const auto now = std::chrono::steady_clock::now();
            auto& next = next_[host];
            slot = std::max(now, next);
            next = slot + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                              std::chrono::duration<double>(interval_));
        }
        std::this_thread::sleep_until(slot);
    }

private:
    double interval_;
    std::mutex mutex_;
    std::map<std::string, std::chrono::steady_clock::time_point> next_;
};

}  // namespace

FetchResult default_fetch(const std::string& url, const CrawlPolicy& policy) {
    FetchResult r;
    if (url.rfind("file://", 0) == 0) {
        std::ifstream in(url.substr(7), std::ios::binary);
        if (!in) {
            r.error = "file not found";
            return r;
        }
        std::ostringstream ss;
        ss << in.rdbuf();
        r.body = ss.str();
        r.ok = !r.body.empty();
        if (!r.ok) r.error = "empty body";
        return r;
    }
    ParsedUrl p;
    try {
        p = parse_url(url);
    } catch (const std::exception&) {
        r.error = "malformed url";
        return r;
    }
    try {
        httplib::Client client(p.scheme_host_port);
        const auto secs = static_cast<time_t>(policy.timeout_seconds);
        const auto usecs = static_cast<time_t>((policy.timeout_seconds - static_cast<double>(secs)) * 1e6);
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_follow_location(true);
        auto res = client.Get(p.path);
        if (!res) {
            r.error = "network error: " + httplib::to_string(res.error());
            return r;
        }
        if (res->status != 200) {
            r.error = "http status " + std::to_string(res->status);
            return r;
        }
        if (res->body.empty()) {
            r.error = "empty body";
            return r;
        }
        r.ok = true;
        r.body = std::move(res->body);
    } catch (const std::exception& e) {
        r.error = std::string("fetch failed: ") + e.what();
    }
    return r;
}

nlohmann::json DecayReport::to_json() const {
    nlohmann::json f = nlohmann::json::array();
    for (const auto& [id, reason] : failures) f.push_back({{"entry_id", id}, {"reason", reason}});
    return {{"total", total},
            {"fetched", fetched},
            {"failed", failed},
            {"pending", pending},
            {"retrieval_fraction", retrieval_fraction()},
            {"requests_issued", requests_issued},
            {"new_fetches", new_fetches},
            {"skipped", skipped},
            {"failures", f}};
}

DecayReport crawl(std::vector<DatasetManifestEntry>& entries, const ContentStore& store, const CrawlPolicy& policy,
                  const Fetcher& fetch, const std::function<void(const std::vector<DatasetManifestEntry>&)>& checkpoint) {
    DecayReport report;
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        if (e.status == RetrievalStatus::fetched && store.has(e.content_digest)) {
            ++report.skipped;
            continue;
        }
        if (e.status == RetrievalStatus::failed && !policy.retry_failed) continue;
        todo.push_back(i);
    }

    struct Outcome {
        std::size_t index;
        bool ok;
        std::string digest_or_error;
        std::size_t requests;
    };
    std::mutex mutex;
    std::condition_variable ready;
    std::deque<Outcome> outcomes;
    std::size_t next = 0;
    HostRateLimiter limiter(policy.rate_limit_per_host);

    auto worker = [&] {
        while (true) {
            std::size_t idx;
            std::string url;
            {
                std::lock_guard lock(mutex);
                if (next >= todo.size()) return;
                idx = todo[next++];
                url = entries[idx].url;  // entries are only mutated after all claims of idx
            }
            Outcome out{idx, false, {}, 0};
            const std::string host = host_of(url);
            for (int attempt = 0; attempt <= policy.retries && !out.ok; ++attempt) {
                limiter.acquire(host);
                ++out.requests;
                FetchResult r = fetch(url, policy);
                if (r.ok) {
                    try {
                        out.digest_or_error = store.put(r.body);
                        out.ok = true;
                    } catch (const std::exception& e) {
                        out.digest_or_error = std::string("store: ") + e.what();
                    }
                } else {
                    out.digest_or_error = r.error;
                }
            }
            {
                std::lock_guard lock(mutex);
                outcomes.push_back(std::move(out));
            }
            ready.notify_one();
        }
    };

    const unsigned n_workers =
        std::max(1u, std::min<unsigned>(policy.concurrency, static_cast<unsigned>(std::max<std::size_t>(todo.size(), 1))));
    std::vector<std::jthread> pool;
    if (!todo.empty())
        for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);

    // single writer: only this thread touches entry state
    std::size_t applied = 0, since_flush = 0;
    while (applied < todo.size()) {
        std::unique_lock lock(mutex);
        ready.wait(lock, [&] { return !outcomes.empty(); });
        Outcome out = std::move(outcomes.front());
        outcomes.pop_front();
        lock.unlock();

        auto& e = entries[out.index];
        report.requests_issued += out.requests;
        if (out.ok) {
            e.status = RetrievalStatus::fetched;
            e.content_digest = out.digest_or_error;
            e.failure_reason.clear();
            ++report.new_fetches;
        } else {
            e.status = RetrievalStatus::failed;
            e.content_digest.clear();
            e.failure_reason = out.digest_or_error;
        }
        ++applied;
        if (checkpoint && policy.flush_every > 0 && ++since_flush >= policy.flush_every) {
            checkpoint(entries);
            since_flush = 0;
        }
    }
    pool.clear();
    if (checkpoint) checkpoint(entries);

    report.total = entries.size();
    for (const auto& e : entries) {
        switch (e.status) {
            case RetrievalStatus::fetched: ++report.fetched; break;
            case RetrievalStatus::failed:
                ++report.failed;
                report.failures.emplace_back(e.entry_id, e.failure_reason);
                break;
            case RetrievalStatus::pending: ++report.pending; break;
        }
    }
    return report;
}

}  // namespace crisisvit
