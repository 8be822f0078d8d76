#!/usr/bin/env python3
"""Regenerates the bundled synthetic review corpora.

sample_reviews.csv: 200 Portuguese-like product reviews with short titles.
toy_pairs.csv:      32 short, distinct (title, review) pairs for overfit tests.

Output is deterministic; run from this directory.
"""

import csv
import random

PRODUCTS = [
    "produto", "celular", "fone", "tênis", "cafeteira", "livro", "relógio", "mochila",
    "perfume", "notebook", "panela", "camiseta", "cadeira", "batom", "carregador", "liquidificador",
]
GOOD_TITLES = [
    "produto muito bom", "excelente", "recomendo", "ótimo produto", "adorei o produto !",
    "muito bom", "perfeito", "gostei muito", "vale a pena", "superou as expectativas",
]
BAD_TITLES = [
    "não recomendo", "produto ruim", "péssimo", "não gostei", "veio com defeito",
    "decepcionante", "não vale a pena",
]
OK_TITLES = ["bom", "razoável", "bom custo benefício", "atendeu as expectativas"]

GOOD_TEXTS = [
    "excelente qualidade, chegou dentro do prazo, recomendo",
    "o {p} é muito bom e chegou antes do prazo",
    "adorei o {p}, veio conforme o anunciado!",
    "fica super lindo, veio conforme o anunciado!",
    "{p} de ótima qualidade, entrega rápida",
    "gostei muito do {p}, funciona perfeitamente",
    "comprei o {p} para minha mãe e ela amou",
    "o {p} superou minhas expectativas, muito bom mesmo",
    "produto perfeito, bem embalado e entrega no prazo",
    "vale cada centavo, {p} excelente",
]
BAD_TEXTS = [
    "o {p} veio com defeito e ninguém responde",
    "não gostei do {p}, qualidade muito ruim",
    "o {p} parou de funcionar em dois dias",
    "péssimo, o {p} chegou quebrado",
    "não recomendo, o {p} é diferente da foto",
    "demorou demais e o {p} veio errado",
]
OK_TEXTS = [
    "o {p} é bom mas a entrega atrasou",
    "{p} razoável pelo preço, nada demais",
    "atendeu o que eu esperava do {p}",
    "bom custo benefício, o {p} cumpre o que promete",
]
EXTRAS = [
    "", " recomendo a loja.", " entrega em 3 dias.", " nota 10!!!", " comprarei novamente.",
    " embalagem ok.", " chegou certinho.", " valeu a pena?",
]


def sample_rows(rng):
    rows = []
    for _ in range(200):
        mood = rng.random()
        product = rng.choice(PRODUCTS)
        if mood < 0.6:
            title, text = rng.choice(GOOD_TITLES), rng.choice(GOOD_TEXTS)
        elif mood < 0.85:
            title, text = rng.choice(BAD_TITLES), rng.choice(BAD_TEXTS)
        else:
            title, text = rng.choice(OK_TITLES), rng.choice(OK_TEXTS)
        text = text.format(p=product) + rng.choice(EXTRAS)
        if rng.random() < 0.5:
            title = title[0].upper() + title[1:]
        rows.append((title, text))
    return rows


TOY = [
    ("produto muito bom", "excelente qualidade chegou dentro do prazo recomendo"),
    ("adorei o produto !", "fica super lindo ele aplicado veio conforme o anunciado !"),
    ("não recomendo", "veio quebrado e a loja não respondeu"),
    ("ótimo celular", "o celular tem bateria que dura o dia todo"),
    ("fone excelente", "o fone tem som limpo e grave forte"),
    ("tênis confortável", "o tênis é leve e muito confortável para correr"),
    ("cafeteira prática", "a cafeteira faz café rápido e é fácil de limpar"),
    ("livro incrível", "o livro prende do começo ao fim"),
    ("relógio bonito", "o relógio é elegante e combina com tudo"),
    ("mochila resistente", "a mochila aguenta peso e tem muitos bolsos"),
    ("perfume cheiroso", "o perfume tem cheiro suave e dura bastante"),
    ("notebook rápido", "o notebook liga em segundos e roda tudo"),
    ("panela boa", "a panela não gruda e esquenta por igual"),
    ("camiseta macia", "a camiseta tem tecido macio e caimento bom"),
    ("cadeira firme", "a cadeira é firme e ajuda na postura"),
    ("batom lindo", "o batom tem cor viva e fixa bem"),
    ("carregador lento", "o carregador demora horas para carregar"),
    ("liquidificador potente", "o liquidificador tritura gelo sem esforço"),
    ("entrega rápida", "chegou em dois dias bem embalado"),
    ("péssimo atendimento", "a loja demorou e ninguém atendeu o telefone"),
    ("veio com defeito", "a tela veio riscada e com manchas"),
    ("vale a pena", "preço justo pelo que oferece"),
    ("superou as expectativas", "achei que seria simples mas é muito melhor"),
    ("tamanho errado", "pedi médio e chegou pequeno"),
    ("cor diferente", "a cor real é mais escura que na foto"),
    ("muito barulho", "o ventilador faz barulho alto demais"),
    ("bateria fraca", "a bateria acaba antes do almoço"),
    ("bom custo benefício", "não é top mas pelo preço atende"),
    ("recomendo muito", "comprei duas vezes e recomendo para todos"),
    ("presente perfeito", "dei de presente e minha irmã amou"),
    ("embalagem danificada", "a caixa chegou amassada mas o item estava inteiro"),
    ("não funciona", "liguei na tomada e nada aconteceu"),
]


def write(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["review_title", "review_text"])
        w.writerows(rows)


if __name__ == "__main__":
    write("sample_reviews.csv", sample_rows(random.Random(20200601)))
    write("toy_pairs.csv", TOY)
