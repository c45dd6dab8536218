// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "forge/lint.hpp"
#include "support/helpers.hpp"

using namespace forge;
using lint::lint_workflow;

namespace {

// A minimal clean workflow; {BODY} is swapped per variant.
std::string clean_script(const std::string& body) {
    return "from datetime import datetime, timedelta\nimport re\nimport rt\n\n\ndef main():\n"
           "    now = datetime.now()\n" +
           body + "    print(result)\n    return result\n";
}

std::vector<std::string> bad_corpus() {
    std::vector<std::string> bad;
    // (a) exception suppression — 6 scripts
    bad.push_back(clean_script("    try:\n        page = rt.fetch_html(\"http://a.test/\")\n"
                               "    except Exception:\n        page = \"\"\n    result = page[:10]\n"));
    bad.push_back(clean_script("    try:\n        result = rt.fetch_markdown(\"http://a.test/\")\n"
                               "    except:\n        result = \"n/a\"\n"));
    bad.push_back(clean_script("    try:\n        result = now.strftime(\"%Y\")\n    finally:\n        pass\n"));
    bad.push_back("from datetime import datetime\nimport contextlib\n\n\ndef main():\n"
                  "    now = datetime.now()\n    result = \"\"\n"
                  "    with contextlib.suppress(Exception):\n        result = str(1 / 0)\n"
                  "    print(result)\n    return result\n");
    bad.push_back(clean_script("    data = rt.fetch_html(\"http://a.test/\")\n"
                               "    try:\n        result = data.split()[0]\n"
                               "    except IndexError:\n        result = \"?\"\n"));
    bad.push_back(clean_script("    result = now.strftime(\"%Y\")\n    try: pass\n    except: pass\n"));
    // (b) fallback literals — 5 scripts
    bad.push_back(clean_script("    page = rt.fetch_markdown(\"http://a.test/\")\n"
                               "    m = re.search(r\"x=(\\d+)\", page)\n"
                               "    result = m and m.group(1) or \"unknown\"\n"));
    bad.push_back(clean_script("    page = rt.fetch_markdown(\"http://a.test/\")\n"
                               "    value = page.strip()\n"
                               "    result = value if value else \"N/A\"\n"));
    bad.push_back(clean_script("    rows = re.findall(r\"\\d+\", rt.fetch_html(\"http://a.test/\"))\n"
                               "    result = rows[0] if rows else '0'\n"));
    bad.push_back(clean_script("    result = rt.fetch_markdown(\"http://a.test/\").strip()\n"
                               "    if not result: result = \"默认答案\"\n"));
    bad.push_back(clean_script("    m = re.search(r\"t=(\\S+)\", rt.fetch_html(\"http://a.test/\"))\n"
                               "    result = (m.group(1) if m else None) or 'fallback'\n"));
    // (c)/(d) clock problems — 5 scripts
    bad.push_back(clean_script("    now = \"2025-10-01\"\n    result = now\n"));
    bad.push_back(clean_script("    now = datetime(2025, 10, 1)\n    result = now.strftime(\"%Y-%m-%d\")\n"));
    bad.push_back(clean_script("    now = datetime.strptime(\"2025-10-01\", \"%Y-%m-%d\")\n"
                               "    result = now.strftime(\"%Y\")\n"));
    bad.push_back("import re\nimport rt\n\n\ndef main():\n"
                  "    page = rt.fetch_markdown(\"http://a.test/\")\n"
                  "    result = re.search(r\"2025-\\d{2}-\\d{2}\", page).group(0)\n"
                  "    print(result)\n    return result\n"); // no clock read at all
    bad.push_back("from datetime import datetime, date\nimport rt\n\n\ndef main():\n"
                  "    today = \"2026-01-01\"\n"
                  "    result = rt.fetch_markdown(\"http://a.test/\") + today\n"
                  "    print(result)\n    return result\n");
    // (e) entry contract — 4 scripts
    bad.push_back("from datetime import datetime\n\n\ndef run():\n    now = datetime.now()\n"
                  "    print(now)\n    return now\n"); // no main
    bad.push_back("from datetime import datetime\n\n\ndef main():\n    now = datetime.now()\n"
                  "    result = now.strftime(\"%Y\")\n    return result\n"); // never prints
    bad.push_back("from datetime import datetime\nresult = datetime.now()\n"); // no entry, no print
    bad.push_back("import time\nimport rt\n\n\ndef main():\n    now = time.time()\n"
                  "    result = rt.fetch_markdown(\"http://a.test/\") + str(now)\n"
                  "    print(result)\n    return result\n"); // reads time.time, not the anchored clock
    return bad;
}

std::vector<std::string> clean_corpus() {
    std::vector<std::string> ok;
    ok.push_back(clean_script("    result = now.strftime(\"%Y-%m-%d\")\n"));
    ok.push_back(clean_script("    target = (now + timedelta(days=1)).strftime(\"%Y-%m-%d\")\n"
                              "    page = rt.fetch_markdown(\"http://a.test/\")\n"
                              "    result = target + \" \" + page[:20]\n"));
    ok.push_back(clean_script("    window = [(now - timedelta(days=k)).strftime(\"%m-%d\") for k in (1, 2, 3)]\n"
                              "    result = \",\".join(window)\n"));
    ok.push_back(clean_script("    page = rt.fetch_html(\"http://a.test/\")\n"
                              "    m = re.search(r\"v=(\\d+)\", page)\n    result = m.group(1)\n"));
    ok.push_back(clean_script("    rows = re.findall(r\"\\d+\", rt.fetch_markdown(\"http://a.test/\"))\n"
                              "    result = max(int(r) for r in rows)\n"));
    ok.push_back(clean_script("    if now.hour < 12:\n        result = \"morning \" + now.strftime(\"%F\")\n"
                              "    else:\n        result = \"evening \" + now.strftime(\"%F\")\n"));
    // a raising guard is fine: failures must propagate
    ok.push_back(clean_script("    page = rt.fetch_html(\"http://a.test/\")\n"
                              "    if not page:\n        raise RuntimeError(\"empty page\")\n"
                              "    result = page[:12]\n"));
    ok.push_back(clean_script("    result = f\"{now:%Y-%m-%d} report\"\n"));
    // strings mentioning forbidden words are data, not code
    ok.push_back(clean_script("    result = \"retry or except are words in prose\" + now.strftime(\"%d\")\n"));
    ok.push_back(clean_script("    note = '说明：不要包含兜底策略'\n    result = note + now.strftime(\"%d\")\n"));
    ok.push_back(clean_script("    total = 0\n    for v in re.findall(r\"\\d+\", rt.fetch_html(\"http://a.test/\")):\n"
                              "        total += int(v)\n    result = str(total)\n"));
    ok.push_back(clean_script("    draw = re.search(r'data-date=\"(\\S+)\"', rt.fetch_html(\"http://a.test/\"))\n"
                              "    age = (now - datetime.strptime(draw.group(1), \"%Y-%m-%d\")).days\n"
                              "    if age > 7:\n        raise RuntimeError(\"stale \" + draw.group(1))\n"
                              "    result = draw.group(1)\n"));
    ok.push_back("from datetime import datetime\nimport rt\n\n\ndef helper(page):\n    return page.strip()\n\n\n"
                 "def main():\n    now = datetime.now()\n    corridor = rt.fetch_markdown(\"http://a.test/\")\n"
                 "    result = helper(corridor) + now.strftime(\"%d\")\n"
                 "    print(result)\n    return result\n");
    ok.push_back(clean_script("    values = {\"a\": 1, \"b\": 2}\n    result = str(values[\"a\"] + now.day)\n"));
    ok.push_back(clean_script("    parts = []\n    parts.append(now.strftime(\"%Y\"))\n"
                              "    parts.append(\"ok\")\n    result = \"-\".join(parts)\n"));
    ok.push_back(clean_script("    result = str(int(now.strftime(\"%d\")) * 2)\n"));
    ok.push_back(clean_script("    text = rt.fetch_markdown(\"http://a.test/\")\n"
                              "    lines = [l for l in text.splitlines() if l.startswith(\"|\")]\n"
                              "    result = lines[0]\n"));
    ok.push_back(clean_script("    page = rt.fetch_markdown(\"http://a.test/\")\n"
                              "    assert page, \"page must not be empty\"\n    result = page[:5]\n"));
    ok.push_back(clean_script("    m = re.findall(r\"(\\d{4}-\\d{2}-\\d{2})\", rt.fetch_html(\"http://a.test/\"))\n"
                              "    result = sorted(m)[-1]\n"));
    ok.push_back(util::read_file(testutil::sample_dataset() / "workflows" / "wf-lottery.py"));
    return ok;
}

} // namespace

TEST_CASE("minimal clean script passes") {
    auto report = lint_workflow(clean_script("    result = now.strftime(\"%F\")\n"));
    CHECK(report.passed);
    CHECK(report.findings.empty());
}

TEST_CASE("broad exception handler is flagged as silent failure") {
    auto report = lint_workflow(
        clean_script("    try:\n        result = rt.fetch_html(\"http://a.test/\")\n"
                     "    except Exception:\n        result = \"\"\n"));
    CHECK_FALSE(report.passed);
    CHECK(report.has_rule("silent-failure"));
}

TEST_CASE("fixed clock literal is flagged") {
    auto report = lint_workflow(clean_script("    now = \"2025-10-01\"\n    result = now\n"));
    CHECK_FALSE(report.passed);
    CHECK(report.has_rule("hardcoded-clock"));
}

TEST_CASE("missing print and missing entry point are flagged") {
    auto no_print = lint_workflow("from datetime import datetime\n\n\ndef main():\n"
                                  "    now = datetime.now()\n    return now\n");
    CHECK(no_print.has_rule("missing-print"));
    auto no_main = lint_workflow("from datetime import datetime\nnow = datetime.now()\nprint(now)\n");
    CHECK(no_main.has_rule("missing-entry-point"));
}

TEST_CASE("findings carry line numbers") {
    auto report = lint_workflow(clean_script("    try:\n        pass\n    except: pass\n    result = 1\n"));
    REQUIRE_FALSE(report.findings.empty());
    CHECK(report.findings.front().line == 8); // the `try:` right after the 7-line preamble
}

TEST_CASE("unparseable source is an error, not a finding") {
    lint::LintOptions opts;
    opts.check_syntax = true;
    CHECK_THROWS_AS(lint_workflow("def main(:\n  oops", opts), lint::ParseError);
    CHECK(lint_workflow(clean_script("    result = now.strftime(\"%F\")\n"), opts).passed);
}

TEST_CASE("seeded corpus: 20 bad rejected, 20 clean accepted") {
    auto bad = bad_corpus();
    auto ok = clean_corpus();
    REQUIRE(bad.size() == 20);
    REQUIRE(ok.size() == 20);
    int rejected = 0, accepted = 0;
    for (const auto& src : bad)
        if (!lint_workflow(src).passed) ++rejected;
    for (const auto& src : ok) {
        auto report = lint_workflow(src);
        if (report.passed)
            ++accepted;
        else
            INFO("clean script rejected:\n" << src << "\n" << report.to_string());
    }
    CHECK(rejected == 20);
    CHECK(accepted == 20);
}
