#!/usr/bin/env python3
"""Regenerates the bundled rule tables under crates/core/tables/.

Tables are plain UTF-8 TSV (`pattern<TAB>output`, `#` comments). Output
columns of IPA stages hold space-separated segments.
"""
import os
import sys

OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "tables")

LATIN_SINGLES = {
    "a": "a", "b": "b", "c": "k", "d": "d", "e": "e", "f": "f", "g": "ɡ",
    "h": "h", "i": "i", "j": "d͡ʒ", "k": "k", "l": "l", "m": "m", "n": "n",
    "o": "o", "p": "p", "q": "k", "r": "ɾ", "s": "s", "t": "t", "u": "u",
    "v": "v", "w": "w", "x": "k s", "y": "j", "z": "z", "'": ".",
}


def write(name, header, rows):
    seen = set()
    path = os.path.join(OUT, name)
    with open(path, "w", encoding="utf-8") as f:
        for line in header:
            f.write("# " + line + "\n")
        for pat, out in rows:
            if pat in seen:
                continue
            seen.add(pat)
            f.write(f"{pat}\t{out}\n")
    print(f"{path}: {len(seen)} entries", file=sys.stderr)


# ---------------------------------------------------------------- Mandarin

ZH_INITIALS = {
    "b": "p", "p": "pʰ", "m": "m", "f": "f", "d": "t", "t": "tʰ", "n": "n",
    "l": "l", "g": "k", "k": "kʰ", "h": "x", "j": "tɕ", "q": "tɕʰ", "x": "ɕ",
    "zh": "ʈʂ", "ch": "ʈʂʰ", "sh": "ʂ", "r": "ʐ", "z": "ts", "c": "tsʰ", "s": "s",
}

ZH_FINALS = {
    "a": "a", "o": "w o", "e": "ɤ", "ai": "aɪ", "ei": "eɪ", "ao": "ɑʊ", "ou": "oʊ",
    "an": "a n", "en": "ə n", "ang": "ɑ ŋ", "eng": "ə ŋ", "ong": "ʊ ŋ", "er": "ɑ ɻ",
    "i": "i", "ia": "j a", "ie": "j ɛ", "iao": "j ɑʊ", "iu": "j oʊ", "ian": "j ɛ n",
    "in": "i n", "iang": "j ɑ ŋ", "ing": "i ŋ", "iong": "j ʊ ŋ",
    "u": "u", "ua": "w a", "uo": "w o", "uai": "w aɪ", "ui": "w eɪ", "uan": "w a n",
    "un": "w ə n", "uang": "w ɑ ŋ",
    "v": "y", "ve": "ɥ œ", "van": "ɥ ɛ n", "vn": "y n",
}

ZH_ZERO_INITIAL = {
    "yi": "i", "ya": "j a", "ye": "j ɛ", "yao": "j ɑʊ", "you": "j oʊ", "yan": "j ɛ n",
    "yin": "i n", "yang": "j ɑ ŋ", "ying": "i ŋ", "yong": "j ʊ ŋ", "yu": "y",
    "yue": "ɥ œ", "yuan": "ɥ ɛ n", "yun": "y n",
    "wu": "u", "wa": "w a", "wo": "w o", "wai": "w aɪ", "wei": "w eɪ", "wan": "w a n",
    "wen": "w ə n", "wang": "w ɑ ŋ", "weng": "w ə ŋ",
    "a": "a", "o": "o", "e": "ɤ", "ai": "aɪ", "ei": "eɪ", "ao": "ɑʊ", "ou": "oʊ",
    "an": "a n", "en": "ə n", "ang": "ɑ ŋ", "eng": "ə ŋ", "er": "ɑ ɻ",
}

ZH_SPECIAL = {
    "zi": "ts ɯ", "ci": "tsʰ ɯ", "si": "s ɯ",
    "zhi": "ʈʂ ʐ̩", "chi": "ʈʂʰ ʐ̩", "shi": "ʂ ʐ̩", "ri": "ʐ ʐ̩",
}


def zh_latin_ipa():
    rows = []
    for syl, ipa in ZH_SPECIAL.items():
        rows.append((syl, ipa))
    for syl, ipa in ZH_ZERO_INITIAL.items():
        rows.append((syl, ipa))
    for ini, iipa in ZH_INITIALS.items():
        for fin, fipa in ZH_FINALS.items():
            if ini in ("j", "q", "x"):
                # j/q/x + u spells the front rounded vowel
                fin_spelled = {"v": "u", "ve": "ue", "van": "uan", "vn": "un"}.get(fin, fin)
                if fin in ("u", "ue", "uan", "un"):
                    continue
            else:
                fin_spelled = fin
            rows.append((ini + fin_spelled, f"{iipa} {fipa}"))
    for letter, ipa in LATIN_SINGLES.items():
        rows.append((letter, {"v": "y"}.get(letter, ipa)))
    return rows


ZH_LEXICON = [
    # word entries take priority over single characters (greedy longest match)
    ("行业", "hang2 ye4"), ("银行", "yin2 hang2"), ("电子", "dian4 zi3"),
    ("越南", "yue4 nan2"), ("通讯社", "tong1 xun4 she4"),
    ("电", "dian4"), ("子", "zi3"), ("行", "xing2|hang2"), ("业", "ye4"),
    ("越", "yue4"), ("南", "nan2"), ("通", "tong1"), ("讯", "xun4"), ("社", "she4"),
    ("中", "zhong1|zhong4"), ("国", "guo2"), ("人", "ren2"), ("民", "min2"),
    ("大", "da4|dai4"), ("学", "xue2"), ("北", "bei3"), ("京", "jing1"),
    ("上", "shang4"), ("海", "hai3"), ("公", "gong1"), ("司", "si1"), ("新", "xin1"),
    ("闻", "wen2"), ("日", "ri4"), ("本", "ben3"), ("韩", "han2"), ("美", "mei3"),
    ("市", "shi4"), ("长", "zhang3|chang2"), ("政", "zheng4"), ("府", "fu3"),
    ("发", "fa1"), ("展", "zhan3"), ("经", "jing1"), ("济", "ji4"), ("文", "wen2"),
    ("化", "hua4"), ("技", "ji4"), ("术", "shu4"), ("研", "yan2"), ("究", "jiu1"),
    ("产", "chan3"), ("信", "xin4"), ("东", "dong1"), ("西", "xi1"), ("河", "he2"),
    ("内", "nei4"), ("家", "jia1"), ("会", "hui4"), ("是", "shi4"), ("的", "de5"),
    ("在", "zai4"), ("和", "he2"), ("了", "le5|liao3"), ("有", "you3"), ("一", "yi1"),
    ("个", "ge4"), ("年", "nian2"), ("王", "wang2"), ("李", "li3"), ("张", "zhang1"),
    ("明", "ming2"), ("华", "hua2"), ("安", "an1"), ("平", "ping2"), ("山", "shan1"),
    ("天", "tian1"), ("工", "gong1"), ("作", "zuo4"), ("访", "fang3"), ("问", "wen4"),
]

# ---------------------------------------------------------------- Vietnamese

VI_RULES = [
    ("b", "ɓ"), ("c", "k"), ("ch", "c"), ("d", "z"), ("đ", "d"), ("g", "ɣ"), ("gh", "ɣ"),
    ("gi", "z"), ("h", "h"), ("k", "k"), ("kh", "x"), ("l", "l"), ("m", "m"), ("n", "n"),
    ("ng", "ŋ"), ("ngh", "ŋ"), ("nh", "ɲ"), ("p", "p"), ("ph", "f"), ("qu", "k w"),
    ("q", "k"), ("r", "z"), ("s", "s"), ("t", "t"), ("th", "tʰ"), ("tr", "ʈ"), ("v", "v"),
    ("x", "s"), ("f", "f"), ("j", "z"), ("w", "w"), ("z", "z"),
    ("a", "a"), ("ă", "a"), ("â", "ɤ"), ("e", "ɛ"), ("ê", "e"), ("i", "i"), ("o", "ɔ"),
    ("ô", "o"), ("ơ", "ɤ"), ("u", "u"), ("ư", "ɯ"), ("y", "i"),
    ("iê", "i ə"), ("ia", "i ə"), ("yê", "i ə"), ("ya", "i ə"), ("uô", "u ə"),
    ("ua", "u ə"), ("ươ", "ɯ ə"), ("ưa", "ɯ ə"),
    ("ai", "a j"), ("ay", "a j"), ("ao", "a w"), ("au", "a w"), ("âu", "ɤ w"),
    ("ây", "ɤ j"), ("oi", "ɔ j"), ("ôi", "o j"), ("ơi", "ɤ j"), ("ui", "u j"),
    ("ưi", "ɯ j"), ("eo", "ɛ w"), ("êu", "e w"), ("iu", "i w"), ("oa", "w a"),
    ("oe", "w ɛ"), ("uy", "w i"), ("'", "."),
]

# ---------------------------------------------------------------- Japanese

GOJUON = [
    ("あ", "a"), ("い", "i"), ("う", "u"), ("え", "e"), ("お", "o"),
    ("か", "ka"), ("き", "ki"), ("く", "ku"), ("け", "ke"), ("こ", "ko"),
    ("さ", "sa"), ("し", "shi"), ("す", "su"), ("せ", "se"), ("そ", "so"),
    ("た", "ta"), ("ち", "chi"), ("つ", "tsu"), ("て", "te"), ("と", "to"),
    ("な", "na"), ("に", "ni"), ("ぬ", "nu"), ("ね", "ne"), ("の", "no"),
    ("は", "ha"), ("ひ", "hi"), ("ふ", "fu"), ("へ", "he"), ("ほ", "ho"),
    ("ま", "ma"), ("み", "mi"), ("む", "mu"), ("め", "me"), ("も", "mo"),
    ("や", "ya"), ("ゆ", "yu"), ("よ", "yo"),
    ("ら", "ra"), ("り", "ri"), ("る", "ru"), ("れ", "re"), ("ろ", "ro"),
    ("わ", "wa"), ("を", "wo"), ("ん", "n"),
    ("が", "ga"), ("ぎ", "gi"), ("ぐ", "gu"), ("げ", "ge"), ("ご", "go"),
    ("ざ", "za"), ("じ", "ji"), ("ず", "zu"), ("ぜ", "ze"), ("ぞ", "zo"),
    ("だ", "da"), ("ぢ", "ji"), ("づ", "zu"), ("で", "de"), ("ど", "do"),
    ("ば", "ba"), ("び", "bi"), ("ぶ", "bu"), ("べ", "be"), ("ぼ", "bo"),
    ("ぱ", "pa"), ("ぴ", "pi"), ("ぷ", "pu"), ("ぺ", "pe"), ("ぽ", "po"),
    ("ぁ", "a"), ("ぃ", "i"), ("ぅ", "u"), ("ぇ", "e"), ("ぉ", "o"),
]
YOON_BASES = {"き": "k", "ぎ": "g", "し": "sh", "じ": "j", "ち": "ch", "に": "n",
              "ひ": "h", "び": "b", "ぴ": "p", "み": "m", "り": "r"}
YOON_SMALL = {"ゃ": "a", "ゅ": "u", "ょ": "o"}


def to_katakana(s):
    return "".join(chr(ord(c) + 0x60) if 0x3041 <= ord(c) <= 0x3096 else c for c in s)


def ja_roman():
    rows = []
    for base, cons in YOON_BASES.items():
        for small, vowel in YOON_SMALL.items():
            roman = cons + vowel if cons in ("sh", "j", "ch") else cons + "y" + vowel
            rows.append((base + small, roman))
    singles = list(GOJUON)
    for kana, roman in list(rows) + singles:
        first = roman[0]
        if first in "aeioun" or roman == "n":
            continue
        gem = ("t" + roman) if roman.startswith("ch") else (first + roman)
        rows.append(("っ" + kana, gem))
    rows.extend(singles)
    rows.append(("っ", "'"))
    extra_kata = [("ティ", "ti"), ("ディ", "di"), ("ファ", "fa"), ("フィ", "fi"),
                  ("フェ", "fe"), ("フォ", "fo"), ("ヴ", "vu"), ("ウィ", "wi"),
                  ("ウェ", "we"), ("シェ", "she"), ("ジェ", "je"), ("チェ", "che")]
    kata = [(to_katakana(k), r) for k, r in rows] + extra_kata
    # katakana long-vowel mark repeats the preceding vowel
    long_rows = []
    for k, r in kata:
        if r[-1] in "aeiou":
            long_rows.append((k + "ー", r + r[-1]))
    kanji = [
        ("電子", "denshi"), ("産業", "sangyou"), ("通信社", "tsuushinsha"),
        ("日本", "nihon"), ("東京", "toukyou"), ("会社", "kaisha"), ("新聞", "shinbun"),
        ("大学", "daigaku"), ("銀行", "ginkou"), ("政府", "seifu"), ("経済", "keizai"),
        ("電", "den"), ("子", "shi"), ("産", "san"), ("業", "gyou"), ("通", "tsuu"),
        ("信", "shin"), ("社", "sha"), ("日", "nichi"), ("本", "hon"), ("人", "jin"),
        ("国", "koku"), ("学", "gaku"), ("大", "dai"),
    ]
    return kanji + long_rows + kata + rows


JA_LATIN_EXTRA = [
    ("sh", "ʃ"), ("ch", "t͡ʃ"), ("ts", "ts"), ("ng", "ŋ"), ("ou", "u"), ("uu", "ʌ u"),
    ("shin", "ʃ ɪ n"), ("sha", "ʃ ə"), ("sa", "s æ"), ("na", "n ɑ"), ("be", "b ɪ"),
    ("to", "t ə"), ("de", "d ɛ"), ("fu", "ɸ u"),
]

# ---------------------------------------------------------------- Korean

KO_LEADS = ["g", "kk", "n", "d", "tt", "r", "m", "b", "pp", "s", "ss", "", "j", "jj",
            "ch", "k", "t", "p", "h"]
KO_VOWELS = ["a", "ae", "ya", "yae", "eo", "e", "yeo", "ye", "o", "wa", "wae", "oe",
             "yo", "u", "wo", "we", "wi", "yu", "eu", "ui", "i"]
KO_TAILS = ["k", "k", "k", "n", "n", "n", "t", "l", "k", "m", "l", "l", "l", "p", "l",
            "m", "p", "p", "t", "t", "ng", "t", "t", "k", "t", "p", "t"]

KO_LATIN = {
    "a": "æ", "b": "b", "c": "t͡ɕ", "d": "d", "e": "ɛ", "f": "f", "g": "ɡ", "h": "h",
    "i": "ɪ", "j": "d͡ʒ", "k": "k", "l": "l", "m": "m", "n": "n", "o": "ɔ", "p": "p",
    "q": "k", "r": "ɾ", "s": "s", "t": "t", "u": "u", "v": "v", "w": "w", "x": "k s",
    "y": "j", "z": "z", "'": ".",
}
KO_LATIN_EXTRA = [
    ("ng", "ŋ"), ("eu", "u"), ("eo", "ɛ ə"), ("eop", "i a w p"), ("ja", "j ə"),
    ("sa", "s ə"), ("san", "s æ n"), ("ae", "ɛ"), ("oe", "ø"), ("ui", "ɰ i"),
    ("ch", "t͡ɕʰ"), ("kk", "k͈"), ("tt", "t͈"), ("pp", "p͈"), ("ss", "s͈"), ("jj", "t͡ɕ͈"),
]


def main():
    os.makedirs(OUT, exist_ok=True)
    write("zh.roman.tsv",
          ["Mandarin hanzi -> numbered pinyin; alternatives separated by '|', first wins."],
          ZH_LEXICON)
    write("zh.latin-ipa.tsv", ["Mandarin pinyin syllable -> IPA segments (toneless)."],
          zh_latin_ipa())
    write("vi.ipa.tsv",
          ["Vietnamese toneless lowercase orthography -> IPA segments.",
           "Tone diacritics are split off before matching."], VI_RULES)
    write("ja.roman.tsv", ["Japanese kana and demo kanji -> Hepburn romaji."], ja_roman())
    write("ja.latin-ipa.tsv", ["Japanese romaji -> IPA segments."],
          JA_LATIN_EXTRA + [(k, v if k != "o" else "o") for k, v in LATIN_SINGLES.items()])
    ko = []
    for i, r in enumerate(KO_LEADS):
        ko.append((chr(0x1100 + i), r))
    for i, r in enumerate(KO_VOWELS):
        ko.append((chr(0x1161 + i), r))
    for i, r in enumerate(KO_TAILS):
        ko.append((chr(0x11A8 + i), r))
    write("ko.roman.tsv", ["Korean conjoining jamo -> Revised Romanization."], ko)
    write("ko.latin-ipa.tsv", ["Korean romanization -> IPA segments."],
          KO_LATIN_EXTRA + list(KO_LATIN.items()))


if __name__ == "__main__":
    main()
