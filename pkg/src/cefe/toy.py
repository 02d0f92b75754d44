"""Small synthetic Chinese essays for demos and end-to-end checks.

Sentences are assembled from a fixed phrase inventory, so clean essays
share a compact n-gram vocabulary that round-trip noise visibly disturbs.
"""

import numpy as np

from .types import Essay

_SUBJECTS = ["我", "我们", "妈妈", "爸爸", "老师", "同学们", "小明", "奶奶", "大家", "弟弟"]
_TIMES = ["今天", "昨天", "周末", "早上", "下午", "晚上", "放学后", "春天里", "假期中", "那一天"]
_PLACES = ["在学校", "在公园", "在家里", "在图书馆", "在操场上", "在小河边", "在教室里", "在山脚下"]
_ACTIONS = [
    "认真地读书", "高兴地唱歌", "一起种树", "打扫房间", "写作业", "画了一幅画", "帮助别人",
    "做了一顿饭", "放风筝", "参观博物馆", "练习书法", "观察小鸟",
]
_FEELINGS = [
    "心里非常快乐", "觉得很有意义", "学到了很多知识", "感到十分温暖", "明白了一个道理",
    "收获了珍贵的友谊", "体会到劳动的光荣", "懂得了坚持的重要",
]
_ENDINGS = ["。", "。", "。", "！", "；"]


def toy_sentence(rng: np.random.Generator) -> str:
    pick = lambda xs: xs[int(rng.integers(len(xs)))]
    if rng.random() < 0.5:
        body = f"{pick(_TIMES)}，{pick(_SUBJECTS)}{pick(_PLACES)}{pick(_ACTIONS)}"
    else:
        body = f"{pick(_SUBJECTS)}{pick(_ACTIONS)}以后，{pick(_FEELINGS)}"
    return body + pick(_ENDINGS)


def toy_essays(n: int, seed: int = 0, min_sentences: int = 6, max_sentences: int = 12, prefix: str = "essay") -> list:
    rng = np.random.default_rng(seed)
    essays = []
    for i in range(n):
        k = int(rng.integers(min_sentences, max_sentences + 1))
        text = "".join(toy_sentence(rng) for _ in range(k))
        essays.append(Essay.from_text(f"{prefix}{i:04d}", text))
    return essays
