#include "cimpact/ingest.hpp"

#include "cimpact/csv.hpp"
#include "cimpact/errors.hpp"

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <functional>
#include <sstream>
#include <thread>

using namespace cimpact;

namespace {

const char* kRequestHeader =
    "Unique Key,Created Date,Agency,Complaint Type,Descriptor,Incident Zip,Borough\n";

std::pair<std::vector<ServiceRequest>, IngestReport> parse(const std::string& text,
                                                           ParseMode mode) {
    std::istringstream in(text);
    return parse_requests(in, mode);
}

} // namespace

TEST_CASE("request rows map onto the retained columns") {
    const std::string text =
        std::string(kRequestHeader) +
        "36154062, 5/11/17, DOB, General construction, Construction, 10002, Manhattan\n" +
        "36154109, 5/10/17, DOT, Street condition, Construction caused congestion, "
        "10075, Manhattan\n";
    auto [requests, report] = parse(text, ParseMode::Strict);
    REQUIRE(requests.size() == 2);
    CHECK(requests[0].unique_key == "36154062");
    CHECK(requests[0].created_date == make_date(2017, 5, 11));
    CHECK(requests[0].agency == "DOB");
    CHECK(requests[0].complaint_type == "General construction");
    CHECK(requests[0].descriptor == "Construction");
    CHECK(requests[0].incident_zip == "10002");
    CHECK(requests[0].borough == "Manhattan");
    CHECK(report.rows_read == 2);
    CHECK(report.rows_kept == 2);
}

TEST_CASE("empty file with a valid header") {
    auto [requests, report] = parse(kRequestHeader, ParseMode::Strict);
    CHECK(requests.empty());
    CHECK(report.rows_read == 0);
}

TEST_CASE("lenient mode skips and counts malformed rows") {
    const std::string text = std::string(kRequestHeader) +
                             "1, 5/11/17, DOB, Noise, x, 10002, Manhattan\n" +
                             "2, 13/45/17, DOB, Noise, x, 10002, Manhattan\n" +
                             "3, 5/12/17, DOB, Noise, x, 10002, Manhattan\n";
    auto [requests, report] = parse(text, ParseMode::Lenient);
    CHECK(requests.size() == 2);
    CHECK(report.rows_read == 3);
    CHECK(report.rows_kept == 2);
    CHECK(report.rows_skipped_malformed == 1);
    CHECK(report.rows_out_of_scope == 0);
}

TEST_CASE("strict mode aborts on the first malformed row") {
    const std::string text = std::string(kRequestHeader) +
                             "2, 13/45/17, DOB, Noise, x, 10002, Manhattan\n";
    CHECK_THROWS_AS(parse(text, ParseMode::Strict), MalformedRow);
}

TEST_CASE("missing required column") {
    CHECK_THROWS_AS(parse("Unique Key,Created Date,Complaint Type\n", ParseMode::Lenient),
                    MissingColumn);
}

TEST_CASE("rows without a usable zip are out of scope, and accounting holds") {
    const std::string text = std::string(kRequestHeader) +
                             "1, 5/11/17, DOB, Noise, x, 10002, Manhattan\n" +
                             "2, 5/11/17, DOB, Noise, x, , Manhattan\n" +
                             "3, 5/11/17, DOB, Noise, x, 10002-1234, Manhattan\n" +
                             "4, bad-date, DOB, Noise, x, 10002, Manhattan\n";
    auto [requests, report] = parse(text, ParseMode::Lenient);
    CHECK(requests.size() == 1);
    CHECK(report.rows_read == 4);
    CHECK(report.rows_kept == 1);
    CHECK(report.rows_skipped_malformed == 1);
    CHECK(report.rows_out_of_scope == 2);
    CHECK(report.rows_read == report.rows_kept + report.rows_skipped_malformed +
                                  report.rows_out_of_scope);
}

TEST_CASE("parse-serialize-parse round-trips the retained fields") {
    const std::string text =
        std::string(kRequestHeader) +
        "1, 5/11/17, DOB, \"Water System, Leak\", \"said \"\"now\"\"\", 10002, Manhattan\n" +
        "2, 2016-02-29, DEP, Sewer, , 10007, \n";
    auto [first, r1] = parse(text, ParseMode::Strict);
    std::ostringstream out;
    write_requests(out, first);
    auto [second, r2] = parse(out.str(), ParseMode::Strict);
    REQUIRE(first.size() == second.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        CHECK(first[i].unique_key == second[i].unique_key);
        CHECK(first[i].created_date == second[i].created_date);
        CHECK(first[i].agency == second[i].agency);
        CHECK(first[i].complaint_type == second[i].complaint_type);
        CHECK(first[i].descriptor == second[i].descriptor);
        CHECK(first[i].incident_zip == second[i].incident_zip);
        CHECK(first[i].borough == second[i].borough);
    }
}

TEST_CASE("duration grammar") {
    CHECK(parse_duration_months("4 years") == 48);
    CHECK(parse_duration_months("2 years 6 months") == 30);
    CHECK(parse_duration_months("1 year 1 months") == 13);
    CHECK(parse_duration_months("1 year") == 12);
    CHECK(parse_duration_months("7 months") == 7);
    CHECK(parse_duration_months("1 month") == 1);
    CHECK_THROWS_AS(parse_duration_months("0 months"), MalformedDuration);
    CHECK_THROWS_AS(parse_duration_months("a while"), MalformedDuration);
    CHECK_THROWS_AS(parse_duration_months("6 months 1 year"), MalformedDuration);
    CHECK_THROWS_AS(parse_duration_months("1 fortnight"), MalformedDuration);
    CHECK_THROWS_AS(parse_duration_months(""), MalformedDuration);
}

TEST_CASE("project table parses the published fixture") {
    // the 27-project road reconstruction table
    const std::string text = R"(id,start,duration,zip
1,08/05/13,4 years,10004
2,09/23/13,1 year 9 months,10034
3,04/14/14,2 years 2 months,10016
4,04/15/14,2 years 6 months,10035
5,07/22/14,1 year 4 months,10030
6,11/24/14,1 year 7 months,10028
7,12/31/14,2 years,10014
8,06/29/15,1 year,10021
9,01/04/16,3 years,10001
10,02/15/16,5 years,10007
11,03/07/16,1 year,10128
12,05/31/16,1 year 1 months,10033
13,06/01/16,2 years,10031
14,06/27/16,2 years 6 months,10038
15,01/31/17,2 years 6 months,10002
16,10/27/14,2 years,10014
17,07/06/15,2 years,10012
18,06/29/15,1 year,10065
19,05/15/16,1 year,10028
20,01/20/14,1 year 6 months,10032
21,06/30/15,1 year,10039
22,06/01/16,2 years,10013
23,01/06/15,1 year 6 months,10040
24,08/05/13,3 years,10003
25,09/16/13,2 years,10007
26,10/20/16,2 years,10016
27,03/01/17,1 year 6 months,10007
)";
    std::istringstream in(text);
    const auto projects = parse_projects(in);
    REQUIRE(projects.size() == 27);
    CHECK(projects[0].id == 1);
    CHECK(projects[0].start_date == make_date(2013, 8, 5));
    CHECK(projects[0].duration_months == 48);
    CHECK(projects[0].zip == "10004");
    CHECK(projects[14].id == 15);
    CHECK(projects[14].duration_months == 30);
    CHECK(projects[14].zip == "10002");
    CHECK(projects[26].duration_months == 18);
}

TEST_CASE("project table rejects bad rows") {
    std::istringstream bad_id("id,start,duration,zip\nx,01/01/20,1 year,10001\n");
    CHECK_THROWS_AS(parse_projects(bad_id), MalformedRow);
    std::istringstream bad_date("id,start,duration,zip\n1,31/31/20,1 year,10001\n");
    CHECK_THROWS_AS(parse_projects(bad_date), MalformedDate);
    std::istringstream bad_duration("id,start,duration,zip\n1,01/01/20,soon,10001\n");
    CHECK_THROWS_AS(parse_projects(bad_duration), MalformedDuration);
    std::istringstream bad_zip("id,start,duration,zip\n1,01/01/20,1 year,1001\n");
    CHECK_THROWS_AS(parse_projects(bad_zip), MalformedRow);
}

TEST_CASE("projects round-trip through their CSV dialect") {
    std::vector<ConstructionProject> projects{
        {1, make_date(2013, 8, 5), 48, "10004"},
        {15, make_date(2017, 1, 31), 30, "10002"},
        {3, make_date(2016, 5, 31), 13, "10033"},
        {4, make_date(2016, 2, 15), 7, "10007"},
    };
    std::ostringstream out;
    write_projects(out, projects);
    std::istringstream in(out.str());
    const auto parsed = parse_projects(in);
    REQUIRE(parsed.size() == projects.size());
    for (std::size_t i = 0; i < projects.size(); ++i) {
        CHECK(parsed[i].id == projects[i].id);
        CHECK(parsed[i].start_date == projects[i].start_date);
        CHECK(parsed[i].duration_months == projects[i].duration_months);
        CHECK(parsed[i].zip == projects[i].zip);
    }
}

TEST_CASE("filter keeps exactly in-zone, in-window requests") {
    ConstructionProject project{15, make_date(2017, 1, 31), 30, "10002"};
    const AnalysisWindow window = expand_window(project);

    auto request = [](const char* zip, Date d) {
        return ServiceRequest{"k", d, "DOB", "Noise", "", zip, ""};
    };
    std::vector<ServiceRequest> requests{
        request("10075", project.start_date),                 // wrong zip
        request("10002", window.anchor()),                    // inclusive start
        request("10002", add_months_clamped(project.start_date, -13)), // too early
        request("10002", add_days(project.start_date, 10)),   // inside
        request("10002", add_months_clamped(project.start_date, 12)),  // window end
    };
    const auto kept = filter_requests(requests, project, window);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].created_date == window.anchor());
    CHECK(kept[1].created_date == add_days(project.start_date, 10));

    // idempotent and a subset of the input
    const auto again = filter_requests(kept, project, window);
    CHECK(again.size() == kept.size());
}

// -- paged fetch against a local stub server ----------------------------------

namespace {

struct StubServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;

    explicit StubServer(std::function<void(httplib::Server&)> setup) {
        setup(server);
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~StubServer() {
        server.stop();
        thread.join();
    }
    std::string url(const std::string& path) const {
        return "http://127.0.0.1:" + std::to_string(port) + path;
    }
};

std::string page_body(int offset, int limit, int total) {
    std::string body = "Unique Key,Created Date,Complaint Type,Incident Zip\n";
    for (int i = offset; i < std::min(offset + limit, total); ++i)
        body += std::to_string(i) + ",01/02/17,Noise,10002\n";
    return body;
}

} // namespace

TEST_CASE("fetch_remote concatenates pages under a single header") {
    const int total = 1037; // one full page of 1000 plus a short page of 37
    std::atomic<int> pages{0};
    StubServer stub([&](httplib::Server& s) {
        s.Get("/data.csv", [&](const httplib::Request& req, httplib::Response& res) {
            ++pages;
            const int offset = std::stoi(req.get_param_value("$offset"));
            const int limit = std::stoi(req.get_param_value("$limit"));
            res.set_content(page_body(offset, limit, total), "text/csv");
        });
    });
    FetchOptions options;
    options.backoff_ms = 1;
    const std::string csv = fetch_remote(stub.url("/data.csv"), {}, options);
    const auto rows = csv_parse_all(csv);
    CHECK(rows.size() == static_cast<std::size_t>(total) + 1); // one header
    CHECK(rows[0][0] == "Unique Key");
    CHECK(pages.load() == 2);
    std::istringstream in(csv);
    auto [requests, report] = parse_requests(in, ParseMode::Strict);
    CHECK(requests.size() == static_cast<std::size_t>(total));
}

TEST_CASE("fetch_remote returns header only for an empty result set") {
    StubServer stub([&](httplib::Server& s) {
        s.Get("/empty.csv", [&](const httplib::Request&, httplib::Response& res) {
            res.set_content("Unique Key,Created Date,Complaint Type,Incident Zip\n",
                            "text/csv");
        });
    });
    FetchOptions options;
    options.backoff_ms = 1;
    const std::string csv = fetch_remote(stub.url("/empty.csv"), {}, options);
    CHECK(csv_parse_all(csv).size() == 1);
}

TEST_CASE("fetch_remote exhausts retries on persistent server errors") {
    std::atomic<int> hits{0};
    StubServer stub([&](httplib::Server& s) {
        s.Get("/broken.csv", [&](const httplib::Request&, httplib::Response& res) {
            ++hits;
            res.status = 500;
        });
    });
    FetchOptions options;
    options.backoff_ms = 1;
    CHECK_THROWS_AS(fetch_remote(stub.url("/broken.csv"), {}, options), NetworkError);
    CHECK(hits.load() == 3);
}

TEST_CASE("fetch_remote recovers from transient failures") {
    std::atomic<int> hits{0};
    StubServer stub([&](httplib::Server& s) {
        s.Get("/flaky.csv", [&](const httplib::Request&, httplib::Response& res) {
            if (++hits <= 2)
                res.status = 503;
            else
                res.set_content(page_body(0, 10, 5), "text/csv");
        });
    });
    FetchOptions options;
    options.backoff_ms = 1;
    const std::string csv = fetch_remote(stub.url("/flaky.csv"), {}, options);
    CHECK(csv_parse_all(csv).size() == 6);
    CHECK(hits.load() == 3);
}

TEST_CASE("fetch_remote rejects non-CSV responses") {
    StubServer stub([&](httplib::Server& s) {
        s.Get("/page.html", [&](const httplib::Request&, httplib::Response& res) {
            res.set_content("<html>not csv</html>", "text/html");
        });
    });
    FetchOptions options;
    options.backoff_ms = 1;
    CHECK_THROWS_AS(fetch_remote(stub.url("/page.html"), {}, options), NonCsvResponse);
}

TEST_CASE("fetch_remote passes filters through as query parameters") {
    std::string seen;
    StubServer stub([&](httplib::Server& s) {
        s.Get("/f.csv", [&](const httplib::Request& req, httplib::Response& res) {
            seen = req.get_param_value("complaint_type");
            res.set_content(page_body(0, 10, 1), "text/csv");
        });
    });
    FetchOptions options;
    options.backoff_ms = 1;
    fetch_remote(stub.url("/f.csv"), {{"complaint_type", "Noise"}}, options);
    CHECK(seen == "Noise");
}

TEST_CASE("ingest report serializes to JSON") {
    const IngestReport r{10, 7, 2, 1};
    CHECK(ingest_report_json(r) ==
          "{\"rows_read\":10,\"rows_kept\":7,\"rows_skipped_malformed\":2,"
          "\"rows_out_of_scope\":1}");
}
