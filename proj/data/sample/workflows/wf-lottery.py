from datetime import datetime
import re
import rt


def main():
    now = datetime.now()
    html = rt.fetch_html("http://lottery.rt-sample.test/ssq/latest")
    block = re.search(r'<table class="draw-table"[\s\S]*?</table>', html).group(0)
    draw_date = re.search(r'data-date="(\d{4}-\d{2}-\d{2})"', block).group(1)
    age = (now - datetime.strptime(draw_date, "%Y-%m-%d")).days
    if age > 7:
        raise RuntimeError("stale draw " + draw_date)
    reds = re.findall(r'class="red">(\d{2})<', block)
    blue = re.search(r'class="blue">(\d{2})<', block).group(1)
    result = " ".join(reds) + " | " + blue
    print(result)
    return result
