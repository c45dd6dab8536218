from datetime import datetime, timedelta
import re
import rt


def main():
    now = datetime.now()
    target = (now + timedelta(days=1)).strftime("%Y-%m-%d")
    page = rt.fetch_markdown("http://weather.rt-sample.test/beijing/forecast")
    row = re.search(r"\| " + target + r" \| ([^|]+) \| ([^|]+) \|", page)
    high = row.group(1).strip()
    sky = row.group(2).strip()
    result = f"{target} 北京 最高气温 {high}，天气 {sky}"
    print(result)
    return result
