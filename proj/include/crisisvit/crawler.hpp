#pragma once

#include <functional>
#include <string>
#include <vector>

#include "crisisvit/manifest.hpp"
#include "json.hpp"

namespace crisisvit {

struct CrawlPolicy {
    unsigned concurrency = 8;
    int retries = 2;                  // extra attempts after the first
    double timeout_seconds = 10;
    double rate_limit_per_host = 0;   // requests per second per host; 0 = unlimited
    bool retry_failed = true;         // re-attempt entries marked failed
    std::size_t flush_every = 1000;   // results between manifest checkpoints
};

struct FetchResult {
    bool ok = false;
    std::string body;
    std::string error;
};

/// Fetches one URL. The default handles http://, https:// and file://.
using Fetcher = std::function<FetchResult(const std::string& url, const CrawlPolicy& policy)>;

FetchResult default_fetch(const std::string& url, const CrawlPolicy& policy);

struct DecayReport {
    std::size_t total = 0;
    std::size_t fetched = 0;
    std::size_t failed = 0;
    std::size_t pending = 0;
    std::size_t requests_issued = 0;  // includes retries
    std::size_t new_fetches = 0;      // entries fetched during this run
    std::size_t skipped = 0;          // already fetched, content present
    std::vector<std::pair<std::string, std::string>> failures;  // entry_id, reason

    double retrieval_fraction() const {
        return total == 0 ? 0.0 : static_cast<double>(fetched) / static_cast<double>(total);
    }
    nlohmann::json to_json() const;
};

/// Fetches every pending (and, per policy, failed) entry into `store`,
/// updating status and digest in place. Entries already fetched whose content
/// is in the store are skipped without a request. Network errors are recorded
/// per entry and never abort the crawl. Workers hand results to the calling
/// thread, which alone mutates `entries` and invokes `checkpoint` every
/// `policy.flush_every` results and once at the end.
DecayReport crawl(std::vector<DatasetManifestEntry>& entries, const ContentStore& store, const CrawlPolicy& policy,
                  const Fetcher& fetch = default_fetch,
                  const std::function<void(const std::vector<DatasetManifestEntry>&)>& checkpoint = {});

}  // namespace crisisvit
