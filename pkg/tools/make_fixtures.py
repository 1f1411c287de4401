#!/usr/bin/env python3
"""Regenerate the committed fixtures: dataset files, rating matrix, product
placeholder images, and the recorded replay log. Deterministic; run from the
repo root after catalogue or template changes."""
from __future__ import annotations

import json
import random
import struct
import sys
import zlib
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from livehost.backends import StubBackend
from livehost.catalogue import load_default_catalogue
from livehost.config import default_config
from livehost.datapipe import jaccard_ngram
from livehost.dialogue import IntentLabel
from livehost.pipeline import PipelineSettings
from livehost.runtime import LiveSession
from livehost.session import SessionConfig

FIXTURES = ROOT / "tests" / "fixtures"
IMAGES = ROOT / "src" / "livehost" / "data" / "images"

CAT = load_default_catalogue()
CFG = default_config()
STUB = CFG["stub_backend"]

CATEGORY_WORD = {"cleanser": "洁面", "serum": "精华", "moisturizer": "面霜", "sunscreen": "防晒"}


def response_for(index: int) -> dict:
    product = CAT.products[index % len(CAT.products)]
    point = product.talking_points[index % len(product.talking_points)]
    slogans = STUB["slogans"].get(product.category.value, STUB["slogans"]["generic"])
    return {
        "spoken": point,
        "slogan": slogans[index % len(slogans)],
        "hook_question": STUB["hooks"][index % len(STUB["hooks"])],
        "cta": STUB["ctas"][index % len(STUB["ctas"])],
    }


def build_dataset_60() -> list[dict]:
    inquiry = [
        "这款洁面乳适合油皮吗", "敏感肌可以用哪支精华", "面霜白天能不能用",
        "防晒需要卸妆吗", "学生党预算少买哪个好", "烟酰胺精华孕期能用吗",
        "干皮冬天用哪款面霜", "军训用什么防晒比较好", "洗面奶早晚都要用吗",
        "混合皮怎么选保湿产品", "精华液一次用几滴", "晚霜和面霜有什么区别",
        "这个防晒会不会闷痘", "神经酰胺是什么成分", "角鲨烷对皮肤有什么用",
        "油皮夏天怎么护肤", "洁颜泡沫和啫喱哪个好", "维生素C精华早上能用吗",
        "换季烂脸用什么修护", "有没有不假白的防晒", "积雪草精华敏感期能用吗",
        "凝霜质地适合什么肤质", "乳木果晚霜会不会太厚", "多少钱可以入手",
    ]
    scepticism = [
        "真的有用吗感觉是智商税", "成分表这么简单不会是忽悠吧", "主播说的功效是不是夸大了",
        "这个价格靠谱吗不太信", "是不是贴牌货啊真的假的", "评论区好评是不是刷的",
        "保湿效果真有说的那么神", "物理防晒真的防得住吗", "敏感肌用了真的不会烂脸吗",
        "感觉和开架货没区别吧", "这成分浓度够吗别是噱头", "用了一周没效果是不是假的",
    ]
    appreciation = [
        "用了一周真的很好用爱了", "回购第三次了家里都在用", "质地太舒服了果断种草",
        "好用到封神推荐大家冲", "敏感肌亲测不刺激点赞", "上脸很润好看又好用",
        "支持主播讲解得真不错", "绝了这个保湿力太棒了", "朋友推荐来的确实好用",
        "太棒了完全不闷痘喜欢", "被种草了颜值也好看", "好用不贵学生党狂喜",
    ]
    antagonism = [
        "垃圾产品用了过敏别买", "主播就是个骗子大家快跑", "难用死了浪费钱避雷",
        "黑心商家赚昧良心钱", "这烂货也好意思拿出来卖", "差评警告买过的都后悔",
        "吹得天花乱坠就是骗钱", "举报了虚假宣传等着吧", "滚出直播间别割韭菜了",
        "烂货一个用完就长痘", "避雷避雷全是套路", "骗子团伙差评到底",
    ]
    groups = [
        (IntentLabel.INQUIRY, inquiry),
        (IntentLabel.SCEPTICISM, scepticism),
        (IntentLabel.APPRECIATION, appreciation),
        (IntentLabel.ANTAGONISM, antagonism),
    ]
    records = []
    pair_counter = 0
    serial = 0
    for intent, comments in groups:
        assert len(comments) % 2 == 0
        for k in range(0, len(comments), 2):
            pair_counter += 1
            pair_id = f"p{pair_counter:03d}"
            for offset, source in ((0, "real"), (1, "synthetic")):
                record = {
                    "pair_id": pair_id,
                    "source": source,
                    "system_prompt": CFG["persona_prompt"],
                    "comment": comments[k + offset],
                    "intent": intent.value,
                    "response": response_for(serial),
                }
                if serial % 2 == 0:
                    record["naturalness"] = round(4.6 + (serial % 5) * 0.08, 2)
                records.append(record)
                serial += 1
    assert len(records) == 60
    counts = {}
    for r in records:
        counts[r["intent"]] = counts.get(r["intent"], 0) + 1
    assert counts == {"inquiry": 24, "scepticism": 12, "appreciation": 12, "antagonism": 12}
    # fixture must be dedup-stable at the default threshold
    for i, a in enumerate(records):
        for b in records[i + 1:]:
            assert jaccard_ngram(a["comment"], b["comment"], 3) <= 0.7, (a["comment"], b["comment"])
    return records


def build_dedup_200() -> list[dict]:
    rng = random.Random(20240811)
    prefixes = ["主播", "想问一下", "姐妹们", "求推荐", "纠结很久了", "第一次来直播间",
                "刚下班来看看", "帮朋友问问", "听说不错", "犹豫要不要入"]
    topics = [p.name for p in CAT.products] + [i for p in CAT.products for i in
                                               {ing.name for ing in p.ingredients}]
    suffixes = ["怎么样", "适合学生党吗", "值得入手吗", "和之前那款比哪个好", "有什么区别",
                "用起来感觉如何", "会不会刺激", "能天天用吗", "需要搭配什么", "现在买划算吗"]
    bases: list[str] = []
    seen = set()
    while len(bases) < 140:
        comment = rng.choice(prefixes) + rng.choice(topics) + rng.choice(suffixes)
        if comment in seen:
            continue
        for kept in bases:
            if jaccard_ngram(comment, kept, 3) > 0.7:
                break
        else:
            seen.add(comment)
            bases.append(comment)
    records = []
    for i, comment in enumerate(bases):
        records.append({
            "pair_id": f"d{i:03d}", "source": "real",
            "system_prompt": CFG["persona_prompt"], "comment": comment,
            "intent": "inquiry", "response": response_for(i),
        })
    # plant 60 near-duplicates of random earlier bases
    fillers = ["呀", "呢", "啊", "哈", "喔"]
    for j in range(60):
        src = rng.randrange(len(bases))
        dup = bases[src] + fillers[j % len(fillers)]
        assert jaccard_ngram(dup, bases[src], 3) > 0.7
        records.append({
            "pair_id": f"d{140 + j:03d}", "source": "synthetic",
            "system_prompt": CFG["persona_prompt"], "comment": dup,
            "intent": "inquiry", "response": response_for(140 + j),
        })
    rng.shuffle(records)
    # keep one deterministic ordering quirk: originals may now follow their
    # duplicates, which is exactly what the greedy-in-order rule must handle
    assert len(records) == 200
    return records


def write_jsonl(path: Path, records: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def write_png(path: Path, rgb: tuple[int, int, int], size: int = 64) -> None:
    def chunk(tag: bytes, data: bytes) -> bytes:
        out = struct.pack(">I", len(data)) + tag + data
        return out + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF)

    ihdr = struct.pack(">IIBBBBB", size, size, 8, 2, 0, 0, 0)
    raw = b"".join(b"\x00" + bytes(rgb) * size for _ in range(size))
    path.write_bytes(b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr)
                     + chunk(b"IDAT", zlib.compress(raw)) + chunk(b"IEND", b""))


def build_images() -> None:
    IMAGES.mkdir(parents=True, exist_ok=True)
    for product in CAT.products:
        h = zlib.crc32(str(product.routing_id).encode())
        rgb = (64 + h % 160, 64 + (h >> 8) % 160, 64 + (h >> 16) % 160)
        write_png(IMAGES / f"{product.routing_id}.png", rgb)


def build_replay_50() -> list[str]:
    session = LiveSession(
        "replayfixture", CAT, PipelineSettings.from_config(CFG), SessionConfig(),
        StubBackend(CFG, seed=0), wall_clock=False,
    )
    session.start(now=0)
    session.tick(14000)
    session.submit_comment("主播有什么推荐的面霜吗", "观众甲", now=15000)
    session.tick(40000)
    session.submit_comment("敏感肌可以用哪支精华", "观众乙", now=41000)
    session.submit_comment("这个防晒会不会闷痘", "观众丙", now=41500)
    session.tick(90000)
    session.submit_comment("用了一周真的很好用爱了", "观众丁", now=92000)
    session.tick(140000)
    session.tick(320000)
    events = session.events_since(0)
    assert len(events) >= 50, f"scenario produced only {len(events)} events"
    return [event.to_json() for event in events[:50]]


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    write_jsonl(FIXTURES / "dataset_60.jsonl", build_dataset_60())
    write_jsonl(FIXTURES / "dedup_200.jsonl", build_dedup_200())
    (FIXTURES / "ratings_binary.csv").write_text("1,1\n0,0\n1,0\n0,1\n", encoding="utf-8")
    (FIXTURES / "ablation_grid.json").write_text(json.dumps({
        "configs": ["baseline", "tt_disabled", "pci_disabled", "rr_disabled"],
        "comments": ["主播有什么推荐的面霜吗", "敏感肌可以用哪支精华", "真的有用吗感觉是智商税"],
    }, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    build_images()
    lines = build_replay_50()
    (FIXTURES / "replay_50.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    frontend_fixture = ROOT / "frontend" / "tests" / "fixtures"
    frontend_fixture.mkdir(parents=True, exist_ok=True)
    (frontend_fixture / "replay_50.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("fixtures written")


if __name__ == "__main__":
    main()
