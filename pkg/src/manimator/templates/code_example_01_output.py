from manim import *


class PythagorasScene(Scene):
    def construct(self):
        title = Text("The Pythagorean Theorem").to_edge(UP)
        self.play(Write(title))
        self.wait(1)

        triangle = Polygon(
            [-2.0, -1.0, 0.0], [1.0, -1.0, 0.0], [1.0, 1.0, 0.0], color=BLUE
        )
        right_angle = Square(side_length=0.3, color=WHITE).move_to([0.85, -0.85, 0.0])
        label_a = MathTex("a").next_to(triangle, DOWN)
        label_b = MathTex("b").next_to(triangle, RIGHT)
        label_c = MathTex("c").move_to([-0.7, 0.3, 0.0])
        self.play(Create(triangle), Create(right_angle))
        self.play(Write(label_a), Write(label_b), Write(label_c))
        self.wait(2)

        equation = MathTex("a^2 + b^2 = c^2").to_edge(DOWN)
        self.play(Write(equation))
        self.wait(2)

        self.play(Indicate(equation))
        self.wait(1)

        everything = VGroup(
            title, triangle, right_angle, label_a, label_b, label_c, equation
        )
        self.play(FadeOut(everything))
        self.wait(1)
