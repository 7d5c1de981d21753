class Student:
    def __init__(self, name, scores):
        self.name = name
        self.scores = scores


class Report:
    def summary(self, student):
        # average
        total = 0
        for s in student.scores:
            total = total + s
        avg = total / len(student.scores)
        # letter
        if avg >= 90:
            letter = "A"
        elif avg >= 80:
            letter = "B"
        elif avg >= 70:
            letter = "C"
        else:
            letter = "F"
        # best
        best = student.scores[0]
        for s in student.scores:
            if s > best:
                best = s
        return student.name + ": " + letter + " (best " + str(best) + ")"
