from datetime import datetime
import re
import rt


def main():
    now = datetime.now()
    page = rt.fetch_markdown("http://quotes.rt-sample.test/sh000001")
    rows = re.findall(r"\| (\d{4}-\d{2}-\d{2}) \| ([0-9.]+) \|", page)
    today = now.strftime("%Y-%m-%d")
    rows = [r for r in rows if r[0] <= today]
    if not rows:
        raise RuntimeError("no close rows on page")
    latest = max(rows, key=lambda r: r[0])
    result = f"{latest[0]} 上证指数收盘 {latest[1]}点"
    print(result)
    return result
