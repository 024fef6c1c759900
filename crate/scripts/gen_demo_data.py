#!/usr/bin/env python3
"""Generate the synthetic English demo probe set, survey table and scripted rules.

The probes imitate the shape of cloze-style value probes (one blank, two
options). Survey shares are synthetic. Re-running this script reproduces the
files under data/demo byte-for-byte.
"""
import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "data" / "demo"
COUNTRY = "United States"

IMPORTANT = ("important", "unimportant")
AGREE = ("agree", "disagree")

families = {
    1: [
        ("{} _ to me.", IMPORTANT, ["Family is", "Friends are", "Leisure time is", "Work is", "Politics is",
                                    "Having children is", "Good manners are", "Independence in children is",
                                    "Hard work in children is", "Tolerance in children is"]),
        ("I _ that {}.", AGREE, ["when a woman works for pay, the children suffer",
                                 "men make better political leaders than women do",
                                 "a university education is more important for a boy than for a girl",
                                 "being a housewife is just as fulfilling as working for pay",
                                 "one of my main goals in life has been to make my parents proud",
                                 "when jobs are scarce, men should have more right to a job than women",
                                 "men make better business executives than women do",
                                 "it is a duty towards society to have children",
                                 "adult children have the duty to provide care for their parents",
                                 "homosexual couples are as good parents as other couples",
                                 "work is a duty towards society"]),
    ],
    2: [
        ("I am _ with my {}.", ("satisfied", "dissatisfied"),
         ["life as a whole", "financial situation", "health", "job", "family life",
          "housing", "neighbourhood", "standard of living", "free time", "education"]),
        ("I have felt _ during the past year about {}.", ("happy", "unhappy"),
         ["my life", "my health", "my work", "my relationships", "my future", "my country",
          "my community", "my income", "my family", "my friends", "my freedom of choice"]),
    ],
    3: [
        ("I have _ confidence in the {}.", ("complete", "no"),
         ["press", "banks", "courts", "police", "parliament", "government", "army",
          "churches", "labour unions", "universities", "television", "civil service",
          "political parties", "major companies", "environmental organizations",
          "women's organizations", "charitable organizations", "United Nations",
          "World Health Organization", "elections", "World Bank"]),
    ],
    5: [
        ("I believe that _ {} are involved in corruption.", ("most", "few"),
         ["state authorities", "business executives", "local authorities",
          "civil service providers", "journalists and media", "tax officials",
          "customs officials", "judges and magistrates", "police officers",
          "members of parliament", "hospital administrators", "school officials",
          "bank managers", "election officials", "municipal clerks", "party leaders",
          "ministers", "public procurement officers", "licensing officers",
          "land registry officers", "military officers", "trade union leaders"]),
    ],
    6: [
        ("I _ that immigration {}.", AGREE,
         ["increases employment", "increases the crime rate", "leads to social conflict",
          "strengthens cultural diversity", "fills important job vacancies",
          "increases the risk of terrorism", "helps poor people establish new lives",
          "increases unemployment", "gives asylum to political refugees",
          "offers people from poor countries a better living", "strains the country's welfare system",
          "brings new ideas to the economy", "lowers wages", "improves public finances",
          "raises housing costs", "supports an ageing population", "weakens national identity",
          "encourages innovation", "burdens public schools", "fosters international trade",
          "increases tax revenue"]),
    ],
    7: [
        ("In my neighbourhood, {} happens _.", ("frequently", "rarely"),
         ["robbery", "alcohol consumption in the streets", "police or military interference with private life",
          "racist behavior", "drug sale in the streets", "street violence and fights",
          "sexual harassment", "vandalism", "burglary", "car theft", "noise at night",
          "aggressive begging", "littering", "illegal dumping", "graffiti",
          "fraud against the elderly", "loitering", "speeding on residential roads",
          "shoplifting", "public drunkenness", "intimidation by gangs"]),
    ],
    9: [
        ("I _ that {}.", AGREE,
         ["science and technology are making our lives healthier",
          "because of science there will be more opportunities for the next generation",
          "we depend too much on science and not enough on faith",
          "it is not important to know about science in daily life",
          "the world is better off because of science and technology",
          "science breaks down people's ideas of right and wrong",
          "new technologies make work more interesting",
          "science brings people from different countries closer",
          "technology makes life easier for older people",
          "the internet is a trustworthy source of information",
          "scientists can be trusted to tell the truth",
          "vaccines are safe for children",
          "artificial intelligence will create more jobs than it destroys",
          "genetic engineering of crops is acceptable",
          "nuclear power is a safe source of energy",
          "space exploration is a good use of public money",
          "social media improves political debate",
          "technology is changing life too fast",
          "science will solve climate change",
          "robots should care for the sick",
          "personal data should be shared for medical research"]),
    ],
    10: [
        ("I _ that there is {}.", AGREE,
         ["hell", "a God", "a heaven", "life after death", "a soul", "sin",
          "a devil", "reincarnation", "fate that decides our lives",
          "a purgatory", "a guardian angel", "a higher power", "a spiritual world"]),
        ("{} is _ in my life.", IMPORTANT,
         ["Religion", "God", "Prayer", "Attending religious services", "Faith",
          "Religious holidays", "Meditation", "Reading scripture", "Belonging to a congregation",
          "Religious education for children", "Charity through religious groups",
          "Fasting for religious reasons"]),
    ],
    11: [
        ("{} is _ justifiable.", ("always", "never"),
         ["Claiming government benefits to which you are not entitled",
          "Avoiding a fare on public transport", "Stealing property", "Cheating on taxes",
          "Someone accepting a bribe in the course of their duties", "Homosexuality",
          "Prostitution", "Abortion", "Divorce", "Sex before marriage", "Suicide",
          "Euthanasia", "For a man to beat his wife", "Parents beating children",
          "Violence against other people", "Terrorism as a political weapon",
          "Having casual sex", "Political violence", "The death penalty",
          "Artificial insemination or in-vitro fertilization", "Lying in your own interest",
          "Keeping money that you have found"]),
    ],
    12: [
        ("I am _ interested in {}.", ("very", "not at all"),
         ["politics", "local politics", "national politics", "international affairs",
          "election campaigns", "political debates on television"]),
        ("I would _ {}.", ("consider", "never consider"),
         ["signing a petition", "joining a boycott", "attending a peaceful demonstration",
          "joining an unofficial strike", "donating to a group or campaign",
          "contacting a government official", "encouraging others to take action about political issues",
          "encouraging others to vote", "searching for information about politics online",
          "signing an electronic petition", "organizing a political event online",
          "voting in local elections", "voting in national elections",
          "joining a political party", "standing as a candidate in an election"]),
    ],
    13: [
        ("Having {} is a _ way of governing this country.", ("good", "bad"),
         ["a strong leader who does not have to bother with parliament and elections",
          "experts, not government, make decisions according to what they think is best for the country",
          "the army rule", "a democratic political system",
          "a system governed by religious law in which there are no political parties or elections",
          "a parliament elected by proportional representation",
          "a single-party government", "a monarchy with limited powers",
          "a federal system with strong regional governments",
          "a president directly elected by the people",
          "referendums on major laws", "a technocratic cabinet",
          "an independent central bank", "term limits for the head of state",
          "compulsory voting for all adults", "a coalition government of several parties",
          "an elected upper house", "judges who can strike down laws",
          "a free press that criticizes the government", "local councils with wide powers",
          "a military with no role in politics"]),
    ],
}


def main():
    rng = random.Random(20240601)
    probes = []
    for cat in sorted(families):
        for template, (opt_a, opt_b), fillers in families[cat]:
            for filler in fillers:
                probes.append((cat, template.format(filler), opt_a, opt_b))
    assert len(probes) == 237, len(probes)
    assert len({p[1] for p in probes}) == 237
    OUT.mkdir(parents=True, exist_ok=True)

    with open(OUT / "probes.jsonl", "w", encoding="utf-8") as f:
        for i, (cat, template, opt_a, opt_b) in enumerate(probes, start=1):
            assert template.count("_") == 1
            rec = {
                "probe_id": f"en-{i:03d}",
                "question_id": f"Q{i:03d}",
                "language": "en",
                "category_index": cat,
                "template": template,
                "option_a": opt_a,
                "option_b": opt_b,
            }
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")

    with open(OUT / "survey.jsonl", "w", encoding="utf-8") as f:
        for i, _ in enumerate(probes, start=1):
            scale = rng.choice([2, 4, 5, 10, 10])
            while True:
                raw = [rng.randint(1, 100) for _ in range(scale)]
                total = sum(raw)
                shares = [round(r / total, 6) for r in raw]
                shares[-1] = round(1.0 - sum(shares[:-1]), 6)
                half = scale // 2
                low = sum(shares[:half])
                high = sum(shares[scale - half:])
                if shares[-1] > 0 and abs(low - high) > 0.02:
                    break
            rec = {
                "question_id": f"Q{i:03d}",
                "country": COUNTRY,
                "scale_size": scale,
                "shares": shares,
                "orientation": rng.choice(["low_is_option_a", "low_is_option_b"]),
            }
            f.write(json.dumps(rec) + "\n")

    for name, gain in [("rules.jsonl", 0.2), ("rules_no_cue.jsonl", 0.0), ("rules_negative_cue.jsonl", -0.2)]:
        with open(OUT / name, "w", encoding="utf-8") as f:
            for i, _ in enumerate(probes, start=1):
                rec = {"probe_id": f"en-{i:03d}", "base_prob_majority": 0.3, "cue_gain": gain}
                f.write(json.dumps(rec) + "\n")


if __name__ == "__main__":
    main()
